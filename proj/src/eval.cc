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

#include "rtd/eval.h"

#include <cmath>
#include <functional>
#include <numeric>

#include "rtd/parallel.h"

namespace rtd {

std::string_view eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kRtd: return "rtd";
    case EvalMode::kBaseline: return "baseline";
    case EvalMode::kFused: return "fused";
  }
  return "rtd";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "rtd") return EvalMode::kRtd;
  if (name == "baseline") return EvalMode::kBaseline;
  if (name == "fused") return EvalMode::kFused;
  throw Error(ErrorCode::kInvalidConfig, "unknown mode '" + std::string(name) + "' (rtd, baseline, fused)");
}

double EvalReport::accuracy() const {
  switch (mode) {
    case EvalMode::kRtd: return accuracy_rtd.value_or(0.0);
    case EvalMode::kBaseline: return accuracy_baseline.value_or(0.0);
    case EvalMode::kFused: return accuracy_fused.value_or(0.0);
  }
  return 0.0;
}

std::optional<std::vector<double>> restrict_to_candidates(const Distribution& d,
                                                          std::span<const std::string> candidates) {
  std::vector<double> out(d.size(), 0.0);
  double total = 0.0;
  for (const auto& c : candidates) {
    const std::size_t i = d.space().index(c);
    out[i] = d[i];
    total += d[i];
  }
  if (total <= 0.0) return std::nullopt;
  for (double& x : out) x /= total;
  return out;
}

CandidateChoice choose_candidate(const Distribution& d, std::span<const std::string> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyInput, "record has no candidates");
  const auto restricted = restrict_to_candidates(d, candidates);
  std::size_t best = d.space().size();
  for (const auto& c : candidates) {
    const std::size_t i = d.space().index(c);
    if (best == d.space().size()) {
      best = i;
      continue;
    }
    const double pi = restricted ? (*restricted)[i] : 0.0;
    const double pb = restricted ? (*restricted)[best] : 0.0;
    if (pi > pb || (pi == pb && i < best)) best = i;
  }
  return {d.space().label(best), !restricted.has_value()};
}

namespace {

std::vector<double> renormalized(std::vector<double> probs, const std::string& id) {
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::kFormatError, "record '" + id + "' baseline has a negative or non-finite entry");
    }
    total += p;
  }
  if (total > 0.0) {
    for (double& p : probs) p /= total;
  }
  return probs;
}

}  // namespace

BaselineView baseline_distribution(const EvalRecord& record, const LabelSpace& labels) {
  if (!record.baseline) throw Error(ErrorCode::kMissingBaseline, "record '" + record.id + "' has no baseline");
  const Baseline& b = *record.baseline;
  if (b.space == Baseline::Space::kVocab) {
    std::vector<double> probs = renormalized(b.probs, record.id);
    if (probs.empty() || std::accumulate(probs.begin(), probs.end(), 0.0) <= 0.0) {
      return {Distribution::uniform(labels), true};
    }
    const double vocab_max = probs[argmax_index(probs)];
    LabelSpace vocab = LabelSpace::token_ids(probs.size());
    const Distribution p_vocab(std::move(vocab), std::move(probs));
    ProjectedBaseline projected = project_baseline(p_vocab, labels, b.answer_tokens);
    bool candidate_at_max = false;
    for (const auto& c : record.candidates) {
      auto it = b.answer_tokens.find(c);
      if (it != b.answer_tokens.end() && p_vocab[it->second] == vocab_max) candidate_at_max = true;
    }
    bool confused = projected.confused || !candidate_at_max;
    const auto restricted = restrict_to_candidates(projected.distribution, record.candidates);
    confused = confused || !restricted;
    return {std::move(projected.distribution), confused};
  }

  // Label-space baseline: probabilities follow the dump's declared labels,
  // which are mapped by name onto `labels`.
  if (b.probs.size() != labels.size()) {
    throw Error(ErrorCode::kLabelSpaceMismatch,
                "record '" + record.id + "' baseline has " + std::to_string(b.probs.size()) + " entries for " +
                    std::to_string(labels.size()) + " labels");
  }
  std::vector<double> probs = renormalized(b.probs, record.id);
  if (std::accumulate(probs.begin(), probs.end(), 0.0) <= 0.0) return {Distribution::uniform(labels), true};
  Distribution dist(labels, std::move(probs));
  const bool confused = !restrict_to_candidates(dist, record.candidates).has_value();
  return {std::move(dist), confused};
}

namespace {

using ReferenceFn = std::function<Distribution(const EvalRecord&)>;

// Maps a label-space baseline declared over `from` onto `to` by label name.
EvalRecord rebase_baseline(const EvalRecord& record, const LabelSpace& from, const LabelSpace& to) {
  EvalRecord out = record;
  if (out.baseline && out.baseline->space == Baseline::Space::kLabels && !(from == to)) {
    std::vector<double> probs(to.size(), 0.0);
    for (std::size_t i = 0; i < from.size(); ++i) probs[to.index(from.label(i))] = record.baseline->probs[i];
    out.baseline->probs = std::move(probs);
  }
  return out;
}

EvalReport evaluate_with(const EvalDump& dump, const LabelSpace& space, const ReferenceFn& reference,
                         const QueryConfig& cfg, EvalMode mode) {
  if (dump.records.empty()) throw Error(ErrorCode::kEmptyInput, "evaluation dump has no records");
  const bool needs_baseline = mode != EvalMode::kRtd;
  const LabelSpace dump_space = dump.label_space();
  for (const auto& rec : dump.records) {
    for (const auto& c : rec.candidates) {
      if (!space.contains(c)) {
        throw Error(ErrorCode::kLabelSpaceMismatch,
                    "record '" + rec.id + "' candidate '" + c + "' is not in the datastore label space");
      }
    }
    if (needs_baseline && !rec.baseline) {
      throw Error(ErrorCode::kMissingBaseline, "record '" + rec.id + "' has no baseline");
    }
  }
  if (needs_baseline) {
    for (const auto& l : dump_space.labels()) {
      if (!space.contains(l)) {
        throw Error(ErrorCode::kLabelSpaceMismatch, "dump label '" + l + "' is not in the datastore label space");
      }
    }
  }

  EvalReport report;
  report.mode = mode;
  report.n = dump.records.size();
  report.config = cfg;
  report.per_record.resize(report.n);

  parallel_for(report.n, [&](std::size_t i) {
    const EvalRecord& rec = dump.records[i];
    RecordResult& res = report.per_record[i];
    res.id = rec.id;
    std::optional<Distribution> r;
    if (mode != EvalMode::kBaseline) {
      r = reference(rec);
      const auto choice = choose_candidate(*r, rec.candidates);
      res.rtd_choice = choice.label;
      res.rtd_correct = choice.label == rec.gold;
      if (mode == EvalMode::kRtd) res.confused = choice.confused;
    }
    if (needs_baseline) {
      const BaselineView base = baseline_distribution(rebase_baseline(rec, dump_space, space), space);
      const auto choice = choose_candidate(base.distribution, rec.candidates);
      res.baseline_choice = choice.label;
      res.baseline_correct = choice.label == rec.gold;
      if (mode == EvalMode::kBaseline) res.confused = base.confused || choice.confused;
      if (mode == EvalMode::kFused) {
        const Distribution fused = fuse(*r, base.distribution, cfg.lambda);
        const auto fchoice = choose_candidate(fused, rec.candidates);
        res.fused_choice = fchoice.label;
        res.fused_correct = fchoice.label == rec.gold;
        res.confused = fchoice.confused;
      }
    }
  });

  auto count = [&](auto member) -> std::optional<std::size_t> {
    if (!(report.per_record.front().*member)) return std::nullopt;
    std::size_t c = 0;
    for (const auto& res : report.per_record) c += *(res.*member) ? 1 : 0;
    return c;
  };
  auto rate = [&](std::optional<std::size_t> c) -> std::optional<double> {
    if (!c) return std::nullopt;
    return static_cast<double>(*c) / static_cast<double>(report.n);
  };
  report.correct_rtd = count(&RecordResult::rtd_correct);
  report.correct_baseline = count(&RecordResult::baseline_correct);
  report.correct_fused = count(&RecordResult::fused_correct);
  report.accuracy_rtd = rate(report.correct_rtd);
  report.accuracy_baseline = rate(report.correct_baseline);
  report.accuracy_fused = rate(report.correct_fused);
  for (const auto& res : report.per_record) report.confused += res.confused ? 1 : 0;
  report.confused_rate = static_cast<double>(report.confused) / static_cast<double>(report.n);
  return report;
}

}  // namespace

EvalReport evaluate(const EvalDump& dump, const ReferenceDatastore& store, const QueryConfig& cfg, EvalMode mode,
                    const Searcher& searcher) {
  cfg.validate();
  return evaluate_with(
      dump, store.label_space(),
      [&](const EvalRecord& rec) { return rtd_query(rec.hidden_state, store, cfg, searcher); }, cfg, mode);
}

EvalReport evaluate(const EvalDump& dump, const MultiHeadDatastore& store, const QueryConfig& cfg, EvalMode mode,
                    const MultiHeadSearcher& searcher) {
  cfg.validate(store.n_sub_stores());
  return evaluate_with(
      dump, store.label_space(),
      [&](const EvalRecord& rec) { return mh_rtd_query(rec.hidden_state, store, cfg, searcher); }, cfg, mode);
}

std::vector<std::size_t> heads_for_fraction(double fraction, std::size_t n_heads) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "head keep fraction must lie in (0, 1]");
  }
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_heads) - 1e-9));
  std::vector<std::size_t> heads(std::max<std::size_t>(1, count));
  std::iota(heads.begin(), heads.end(), 0);
  return heads;
}

EvalReport evaluate_store(const EvalDump& dump, const ReferenceDatastore& store, const QueryConfig& cfg,
                          EvalMode mode) {
  if (store.layout().n_heads == 1 && !cfg.head_keep) return evaluate(dump, store, cfg, mode);
  return evaluate(dump, split_heads(store), cfg, mode);
}

std::vector<SweepRow> sweep(const EvalDump& dump, const ReferenceDatastore& store, const SweepGrid& grid,
                            const QueryConfig& base, EvalMode mode) {
  auto or_default = [](auto values, auto fallback) {
    if (values.empty()) values.push_back(fallback);
    return values;
  };
  const auto prefixes = or_default(grid.prefixes, store.size());
  const auto fractions = or_default(grid.head_keep_fractions, 1.0);
  const auto ks = or_default(grid.ks, base.k);
  const auto temps = or_default(grid.temperatures, base.temperature);
  const auto lambdas = or_default(grid.lambdas, base.lambda);
  for (std::size_t p : prefixes) {
    if (p == 0 || p > store.size()) {
      throw Error(ErrorCode::kInvalidConfig, "prefix " + std::to_string(p) + " outside [1, " +
                                                 std::to_string(store.size()) + "]");
    }
  }
  for (double f : fractions) heads_for_fraction(f, store.layout().n_heads);

  std::vector<SweepRow> rows;
  for (std::size_t p : prefixes) {
    const ReferenceDatastore sub = p == store.size() ? store : store.prefix(p);
    std::optional<MultiHeadDatastore> mh;
    for (double f : fractions) {
      const bool single = sub.layout().n_heads == 1 && f == 1.0;
      if (!single && !mh) mh = split_heads(sub);
      for (std::size_t k : ks) {
        for (double t : temps) {
          for (double l : lambdas) {
            QueryConfig cfg = base;
            cfg.k = k;
            cfg.temperature = t;
            cfg.lambda = l;
            cfg.head_keep.reset();
            if (f < 1.0) cfg.head_keep = heads_for_fraction(f, sub.layout().n_heads);
            EvalReport report = single ? evaluate(dump, sub, cfg, mode) : evaluate(dump, *mh, cfg, mode);
            rows.push_back({k, t, l, p, f, std::move(report)});
          }
        }
      }
    }
  }
  return rows;
}

}  // namespace rtd
