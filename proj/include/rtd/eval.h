// Copyright 2026 The RTD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtd/core.h"
#include "rtd/datastore.h"
#include "rtd/decode.h"
#include "rtd/dump.h"

namespace rtd {

enum class EvalMode { kRtd, kBaseline, kFused };

std::string_view eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(std::string_view name);

struct RecordResult {
  std::string id;
  std::optional<std::string> rtd_choice;
  std::optional<std::string> baseline_choice;
  std::optional<std::string> fused_choice;
  std::optional<bool> rtd_correct;
  std::optional<bool> baseline_correct;
  std::optional<bool> fused_correct;
  bool confused = false;
};

struct EvalReport {
  EvalMode mode = EvalMode::kRtd;
  std::size_t n = 0;
  std::optional<std::size_t> correct_rtd;
  std::optional<std::size_t> correct_baseline;
  std::optional<std::size_t> correct_fused;
  std::size_t confused = 0;
  std::optional<double> accuracy_rtd;
  std::optional<double> accuracy_baseline;
  std::optional<double> accuracy_fused;
  double confused_rate = 0.0;
  std::vector<RecordResult> per_record;
  QueryConfig config;

  /// Accuracy of the report's own mode.
  double accuracy() const;
};

/// Zeroes labels outside `candidates` and renormalizes. Returns nullopt when
/// the candidates carry no mass.
std::optional<std::vector<double>> restrict_to_candidates(const Distribution& d,
                                                          std::span<const std::string> candidates);

/// Picks an answer among candidates (lowest label index on ties); `confused`
/// is set when the candidates carry zero mass.
struct CandidateChoice {
  std::string label;
  bool confused = false;
};
CandidateChoice choose_candidate(const Distribution& d, std::span<const std::string> candidates);

/// Baseline projected onto the dump's label space plus the confusion flag
/// (zero candidate mass, or in vocab space no candidate token reaching the
/// vocabulary maximum).
struct BaselineView {
  Distribution distribution;
  bool confused = false;
};
BaselineView baseline_distribution(const EvalRecord& record, const LabelSpace& labels);

/// Scores every record. rtd mode ignores baselines; baseline and fused modes
/// require one on every record. fused mode also reports rtd and baseline
/// accuracy. Records are scored in parallel; the report does not depend on it.
EvalReport evaluate(const EvalDump& dump, const ReferenceDatastore& store, const QueryConfig& cfg, EvalMode mode,
                    const Searcher& searcher = ExactSearch{});
EvalReport evaluate(const EvalDump& dump, const MultiHeadDatastore& store, const QueryConfig& cfg, EvalMode mode,
                    const MultiHeadSearcher& searcher = ExactSearch{});

struct SweepGrid {
  std::vector<std::size_t> ks;
  std::vector<double> temperatures;
  std::vector<double> lambdas;
  std::vector<std::size_t> prefixes;          // s_L build-order prefixes
  std::vector<double> head_keep_fractions;    // of the store's heads
};

struct SweepRow {
  std::size_t k;
  double temperature;
  double lambda;
  std::size_t prefix;
  double head_keep_fraction;
  EvalReport report;
};

/// Heads kept for a fraction f of n_heads: the first ceil(f * n_heads) heads.
std::vector<std::size_t> heads_for_fraction(double fraction, std::size_t n_heads);

/// Cartesian product, ordered prefix > keep fraction > k > T > lambda.
/// Empty grid axes take the value from `base` (prefix: full store, keep: 1).
/// Single-head stores queried with every head use rtd_query, others
/// mh_rtd_query.
std::vector<SweepRow> sweep(const EvalDump& dump, const ReferenceDatastore& store, const SweepGrid& grid,
                            const QueryConfig& base, EvalMode mode);

/// Evaluates a store with the query path sweep uses (see above).
EvalReport evaluate_store(const EvalDump& dump, const ReferenceDatastore& store, const QueryConfig& cfg,
                          EvalMode mode);

struct SynthSpec {
  std::size_t n_classes = 4;
  std::size_t dim = 128;
  std::size_t per_class = 256;        // datastore entries per class
  std::size_t queries_per_class = 100;
  double separation = 1.0;            // pairwise distance between class centers
  double noise_sigma = 0.1;           // per-coordinate standard deviation
  std::size_t heads = 1;
  /// Draw one head_dim-wide vector and tile it across every head.
  bool redundant_heads = false;
  /// Attach a uniform label-space baseline to each query record.
  bool uniform_baseline = false;
};

struct SynthData {
  EvalDump store_dump;  // datastore build input, one record per entry
  EvalDump queries;     // evaluation records
};

/// Seeded Gaussian clusters, one mutually equidistant center per class.
/// Datastore entries and queries are interleaved across classes.
SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

struct BenchOptions {
  std::vector<std::size_t> sizes;
  std::size_t k = 32;
  double temperature = 750.0;
  std::size_t warmup = 5;
  std::size_t repetitions = 30;
  bool include_ivf = false;
  std::size_t n_lists = 64;
  std::size_t n_probe = 8;
  std::uint64_t seed = 0;
  std::vector<double> head_keep_fractions;  // multi-head timings per fraction
};

struct BenchRow {
  std::size_t size;
  std::string searcher;  // "exact", "ivf", or "mh-keep-<n>"
  double median_seconds;
  std::size_t measurements;
  std::uint64_t key_bytes;
};

/// Median wall time per rtd query (after warmup) at each prefix size.
/// Runs single-threaded.
std::vector<BenchRow> bench(const ReferenceDatastore& store, std::span<const std::vector<double>> queries,
                            const BenchOptions& options);

}  // namespace rtd
