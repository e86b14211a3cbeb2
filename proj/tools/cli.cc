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

#include "cli.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rtd/datastore.h"
#include "rtd/decode.h"
#include "rtd/dump.h"
#include "rtd/eval.h"
#include "rtd/knn.h"

namespace rtd::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidLayout:
    case ErrorCode::kInvalidPlan:
    case ErrorCode::kEmptyKeepSet:
    case ErrorCode::kUnknownHead:
    case ErrorCode::kNonPositiveTemperature:
    case ErrorCode::kTooManyLists:
    case ErrorCode::kInvalidSpec:
      return kExitUsage;
    case ErrorCode::kInvalidDistribution:
      return kExitInternal;
    default:
      return kExitData;
  }
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.find_first_not_of(" \t") == std::string::npos) {
    throw Error(ErrorCode::kEmptyKeepSet, "--heads-keep needs at least one head index");
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidConfig, "bad head index '" + item + "' in --heads-keep");
    }
  }
  return out;
}

std::vector<double> read_vector(const std::string& source) {
  json j;
  try {
    if (source == "-") {
      j = json::parse(std::cin);
    } else {
      std::ifstream in(source);
      if (!in) throw Error(ErrorCode::kIoError, "cannot open vector file " + source);
      j = json::parse(in);
    }
    auto v = j.get<std::vector<double>>();
    check_finite(v, "query vector");
    return v;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, "query vector must be a JSON array of numbers: " + std::string(e.what()));
  }
}

// Label -> probability, highest first; ties keep label order.
ordered_json distribution_json(const Distribution& d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  ordered_json out = ordered_json::object();
  for (std::size_t i : order) out[d.space().label(i)] = d[i];
  return out;
}

// Baseline file: {"space": "labels"|"vocab", "probs": [...], "answer_tokens": {...}}.
BaselineView read_baseline(const std::string& path, const LabelSpace& labels) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open baseline file " + path);
  std::stringstream text;
  text << in.rdbuf();
  json j;
  try {
    j = json::parse(text.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, "baseline file is not valid JSON: " + std::string(e.what()));
  }
  // Reuse the record parser for the baseline object.
  json wrapper = {{"id", "baseline"}, {"hidden_state", json::array()}, {"gold", labels.label(0)},
                  {"candidates", labels.labels()}, {"baseline", j}};
  EvalRecord rec = parse_record(wrapper.dump(), 1);
  if (rec.baseline->space == Baseline::Space::kLabels && rec.baseline->probs.size() != labels.size()) {
    throw Error(ErrorCode::kFormatError, "label-space baseline needs one probability per datastore label");
  }
  for (const auto& [label, token] : rec.baseline->answer_tokens) {
    if (!labels.contains(label)) throw Error(ErrorCode::kFormatError, "answer token for unknown label '" + label + "'");
  }
  return baseline_distribution(rec, labels);
}

ordered_json config_json(const QueryConfig& cfg) {
  ordered_json j = {{"k", cfg.k}, {"temperature", cfg.temperature}, {"lambda", cfg.lambda}};
  j["head_keep"] = cfg.head_keep ? ordered_json(*cfg.head_keep) : ordered_json(nullptr);
  return j;
}

template <typename T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["mode"] = eval_mode_name(r.mode);
  j["n"] = r.n;
  j["accuracy"] = r.accuracy();
  j["accuracy_rtd"] = optional_json(r.accuracy_rtd);
  j["accuracy_baseline"] = optional_json(r.accuracy_baseline);
  j["accuracy_fused"] = optional_json(r.accuracy_fused);
  j["correct_rtd"] = optional_json(r.correct_rtd);
  j["correct_baseline"] = optional_json(r.correct_baseline);
  j["correct_fused"] = optional_json(r.correct_fused);
  j["confused"] = r.confused;
  j["confused_rate"] = r.confused_rate;
  j["config"] = config_json(r.config);
  ordered_json records = ordered_json::array();
  for (const auto& rec : r.per_record) {
    records.push_back({{"id", rec.id},
                       {"rtd_choice", optional_json(rec.rtd_choice)},
                       {"baseline_choice", optional_json(rec.baseline_choice)},
                       {"fused_choice", optional_json(rec.fused_choice)},
                       {"rtd_correct", optional_json(rec.rtd_correct)},
                       {"baseline_correct", optional_json(rec.baseline_correct)},
                       {"fused_correct", optional_json(rec.fused_correct)},
                       {"confused", rec.confused}});
  }
  j["per_record"] = std::move(records);
  return j;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << *v;
  return s.str();
}

void print_report(const EvalReport& r, std::ostream& out) {
  out << "mode            " << eval_mode_name(r.mode) << '\n'
      << "records         " << r.n << '\n'
      << "accuracy_rtd    " << fmt_opt(r.accuracy_rtd) << '\n'
      << "accuracy_base   " << fmt_opt(r.accuracy_baseline) << '\n'
      << "accuracy_fused  " << fmt_opt(r.accuracy_fused) << '\n'
      << "confused_rate   " << fmt_opt(r.confused_rate) << " (" << r.confused << ")\n"
      << "k=" << r.config.k << " temperature=" << r.config.temperature << " lambda=" << r.config.lambda << '\n';
}

struct QueryFlags {
  std::size_t k = 1024;
  double temperature = 750.0;
  double lambda = 1.0;
  std::optional<std::string> heads_keep;

  void add_to(CLI::App* app) {
    app->add_option("--k", k, "Neighbors retrieved per query (top-K)")->capture_default_str();
    app->add_option("--temp", temperature, "Distance temperature T")->capture_default_str();
    app->add_option("--lambda", lambda,
                    "Fusion weight on the reference distribution; 0.4-0.7 works well for generation")
        ->capture_default_str();
    app->add_option("--heads-keep", heads_keep, "Comma-separated head indices to query (multi-head stores)");
  }

  QueryConfig config() const {
    QueryConfig cfg;
    cfg.k = k;
    cfg.temperature = temperature;
    cfg.lambda = lambda;
    if (heads_keep) cfg.head_keep = parse_index_list(*heads_keep);
    return cfg;
  }
};

bool use_multi_head(const ReferenceDatastore& store, const QueryConfig& cfg) {
  return store.layout().n_heads > 1 || cfg.head_keep.has_value();
}

// ---------------------------------------------------------------------------

struct BuildArgs {
  std::string input, output, dtype = "f32";
  std::optional<std::size_t> heads;
};

int cmd_build(const BuildArgs& a, std::ostream& out) {
  const EvalDump dump = read_dump(a.input);
  if (dump.records.empty()) throw Error(ErrorCode::kEmptyInput, "dump " + a.input + " has no records");
  const HeadLayout layout = HeadLayout::make(dump.manifest.model_dim, a.heads.value_or(dump.manifest.n_heads));
  const ReferenceDatastore store =
      build_datastore(datastore_pairs(dump), dump.label_space(), layout, parse_dtype(a.dtype));
  save_datastore(store, a.output);
  const auto fp = memory_footprint(store);
  out << "wrote " << a.output << ": size=" << store.size() << " model_dim=" << store.model_dim()
      << " heads=" << layout.n_heads << " head_dim=" << layout.head_dim << " dtype=" << dtype_name(store.dtype())
      << " labels=" << store.label_space().size() << " key_bytes=" << fp.key_bytes
      << " overhead_bytes=" << fp.overhead_bytes << '\n';
  return kExitOk;
}

struct IndexArgs {
  std::string store, output;
  std::size_t lists = 64;
  std::uint64_t seed = 0;
};

int cmd_index(const IndexArgs& a, std::ostream& out) {
  const ReferenceDatastore store = load_datastore(a.store);
  const IvfIndex index = build_ivf(store, a.lists, a.seed);
  save_ivf(index, a.output);
  std::size_t largest = 0;
  for (const auto& p : index.postings) largest = std::max(largest, p.size());
  out << "wrote " << a.output << ": lists=" << index.n_lists() << " dim=" << index.dim
      << " largest_list=" << largest << '\n';
  return kExitOk;
}

struct QueryArgs {
  std::string store, vector;
  std::optional<std::string> baseline, index;
  std::size_t nprobe = 8;
  QueryFlags flags;
};

int cmd_query(const QueryArgs& a, std::ostream& out) {
  const QueryConfig cfg = a.flags.config();
  const ReferenceDatastore store = load_datastore(a.store);
  const std::vector<double> h = read_vector(a.vector);
  if (h.size() != store.model_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "vector has " + std::to_string(h.size()) + " entries, store model_dim is " +
                                                   std::to_string(store.model_dim()));
  }

  std::optional<Distribution> r;
  if (use_multi_head(store, cfg)) {
    if (a.index) throw Error(ErrorCode::kInvalidConfig, "--index works with single-head queries only");
    r = mh_rtd_query(h, split_heads(store), cfg);
  } else if (a.index) {
    const IvfIndex index = load_ivf(*a.index);
    r = rtd_query(h, store, cfg, IvfSearch{&index, a.nprobe});
  } else {
    r = rtd_query(h, store, cfg);
  }

  if (!a.baseline) {
    out << distribution_json(*r).dump() << '\n';
    return kExitOk;
  }
  const BaselineView base = read_baseline(*a.baseline, store.label_space());
  const Distribution fused = fuse(*r, base.distribution, cfg.lambda);
  ordered_json j;
  j["reference"] = distribution_json(*r);
  j["baseline"] = distribution_json(base.distribution);
  j["fused"] = distribution_json(fused);
  j["lambda"] = cfg.lambda;
  j["baseline_confused"] = base.confused;
  out << j.dump() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string store, dump, mode = "rtd";
  std::optional<std::string> index;
  std::size_t nprobe = 8;
  bool json = false;
  QueryFlags flags;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const QueryConfig cfg = a.flags.config();
  const EvalMode mode = parse_eval_mode(a.mode);
  const ReferenceDatastore store = load_datastore(a.store);
  const EvalDump dump = read_dump(a.dump);
  EvalReport report;
  if (a.index) {
    if (use_multi_head(store, cfg)) throw Error(ErrorCode::kInvalidConfig, "--index works with single-head queries only");
    const IvfIndex index = load_ivf(*a.index);
    report = evaluate(dump, store, cfg, mode, IvfSearch{&index, a.nprobe});
  } else {
    report = evaluate_store(dump, store, cfg, mode);
  }
  if (a.json) {
    out << report_json(report).dump() << '\n';
  } else {
    print_report(report, out);
  }
  return kExitOk;
}

struct SweepArgs {
  std::string store, dump, mode = "rtd";
  std::vector<std::size_t> grid_k, grid_prefix;
  std::vector<double> grid_temp, grid_lambda, grid_keep;
  bool json = false;
  QueryFlags flags;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  QueryConfig base = a.flags.config();
  if (base.head_keep) throw Error(ErrorCode::kInvalidConfig, "use --grid-keep for head fractions in sweeps");
  const ReferenceDatastore store = load_datastore(a.store);
  const EvalDump dump = read_dump(a.dump);
  const SweepGrid grid{a.grid_k, a.grid_temp, a.grid_lambda, a.grid_prefix, a.grid_keep};
  const auto rows = sweep(dump, store, grid, base, parse_eval_mode(a.mode));
  if (a.json) {
    ordered_json j = ordered_json::array();
    for (const auto& row : rows) {
      ordered_json r = {{"k", row.k},
                        {"temperature", row.temperature},
                        {"lambda", row.lambda},
                        {"prefix", row.prefix},
                        {"head_keep_fraction", row.head_keep_fraction}};
      r["report"] = report_json(row.report);
      j.push_back(std::move(r));
    }
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << std::left << std::setw(8) << "prefix" << std::setw(8) << "keep" << std::setw(8) << "k" << std::setw(12)
      << "temp" << std::setw(8) << "lambda" << std::setw(10) << "accuracy" << "confused\n";
  for (const auto& row : rows) {
    out << std::left << std::setw(8) << row.prefix << std::setw(8) << row.head_keep_fraction << std::setw(8) << row.k
        << std::setw(12) << row.temperature << std::setw(8) << row.lambda << std::setw(10)
        << fmt_opt(row.report.accuracy()) << fmt_opt(row.report.confused_rate) << '\n';
  }
  return kExitOk;
}

struct SynthArgs {
  SynthSpec spec;
  std::uint64_t seed = 0;
  std::string output_prefix;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthData data = synth_generate(a.spec, a.seed);
  const std::string store_path = a.output_prefix + ".store.jsonl";
  const std::string eval_path = a.output_prefix + ".eval.jsonl";
  write_dump(data.store_dump, store_path);
  write_dump(data.queries, eval_path);
  out << "wrote " << store_path << " (" << data.store_dump.records.size() << " entries) and " << eval_path << " ("
      << data.queries.records.size() << " queries)\n";
  return kExitOk;
}

struct BenchArgs {
  std::string store, dump;
  BenchOptions options;
  std::size_t queries = 100;
  bool json = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const ReferenceDatastore store = load_datastore(a.store);
  const EvalDump dump = read_dump(a.dump);
  std::vector<std::vector<double>> queries;
  for (std::size_t i = 0; i < std::min(a.queries, dump.records.size()); ++i) {
    queries.push_back(dump.records[i].hidden_state);
  }
  BenchOptions options = a.options;
  if (options.sizes.empty()) options.sizes.push_back(store.size());
  const auto rows = bench(store, queries, options);
  if (a.json) {
    ordered_json j = ordered_json::array();
    for (const auto& r : rows) {
      j.push_back({{"size", r.size},
                   {"searcher", r.searcher},
                   {"median_seconds", r.median_seconds},
                   {"measurements", r.measurements},
                   {"key_bytes", r.key_bytes}});
    }
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << std::left << std::setw(10) << "size" << std::setw(14) << "searcher" << std::setw(16) << "median_ms"
      << std::setw(8) << "reps" << "key_bytes\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.size << std::setw(14) << r.searcher << std::setw(16) << std::fixed
        << std::setprecision(4) << r.median_seconds * 1e3 << std::setw(8) << r.measurements << r.key_bytes << '\n';
    out.unsetf(std::ios::fixed);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference-distribution decoding over a nearest-neighbor datastore", "rtd"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Optional key=value configuration file");

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "Build an RTDS datastore from a JSONL dump");
  build_cmd->add_option("--input", build.input, "Input dump (JSON Lines)")->required();
  build_cmd->add_option("--output", build.output, "Output RTDS file")->required();
  build_cmd->add_option("--heads", build.heads, "Head count (defaults to the manifest's)");
  build_cmd->add_option("--dtype", build.dtype, "Key storage type")->check(CLI::IsMember({"f32", "f16"}))
      ->capture_default_str();

  IndexArgs index;
  auto* index_cmd = app.add_subcommand("index", "Train an IVF index for a datastore");
  index_cmd->add_option("--store", index.store, "RTDS datastore")->required();
  index_cmd->add_option("--output", index.output, "Output RTIX file")->required();
  index_cmd->add_option("--lists", index.lists, "Number of inverted lists")->capture_default_str();
  index_cmd->add_option("--seed", index.seed, "Seed for centroid initialization")->capture_default_str();

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "Reference distribution for one hidden state");
  query_cmd->add_option("--store", query.store, "RTDS datastore")->required();
  query_cmd->add_option("--vector", query.vector, "JSON array file, or - for stdin")->required();
  query_cmd->add_option("--baseline", query.baseline, "Baseline distribution JSON to fuse with");
  query_cmd->add_option("--index", query.index, "RTIX index for approximate search");
  query_cmd->add_option("--nprobe", query.nprobe, "Lists probed with --index")->capture_default_str();
  query.flags.add_to(query_cmd);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Multiple-choice evaluation of a dump");
  eval_cmd->add_option("--store", eval.store, "RTDS datastore")->required();
  eval_cmd->add_option("--dump", eval.dump, "Evaluation dump (JSON Lines)")->required();
  eval_cmd->add_option("--mode", eval.mode, "rtd, baseline or fused")->capture_default_str();
  eval_cmd->add_option("--index", eval.index, "RTIX index for approximate search");
  eval_cmd->add_option("--nprobe", eval.nprobe, "Lists probed with --index")->capture_default_str();
  eval_cmd->add_flag("--json", eval.json, "Emit the report as JSON");
  eval.flags.add_to(eval_cmd);

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate over a hyperparameter grid");
  sweep_cmd->add_option("--store", sw.store, "RTDS datastore")->required();
  sweep_cmd->add_option("--dump", sw.dump, "Evaluation dump (JSON Lines)")->required();
  sweep_cmd->add_option("--mode", sw.mode, "rtd, baseline or fused")->capture_default_str();
  sweep_cmd->add_option("--grid-k", sw.grid_k, "Comma-separated K values")->delimiter(',');
  sweep_cmd->add_option("--grid-temp", sw.grid_temp, "Comma-separated temperatures")->delimiter(',');
  sweep_cmd->add_option("--grid-lambda", sw.grid_lambda, "Comma-separated lambdas")->delimiter(',');
  sweep_cmd->add_option("--grid-prefix", sw.grid_prefix, "Comma-separated datastore prefix sizes")->delimiter(',');
  sweep_cmd->add_option("--grid-keep", sw.grid_keep, "Comma-separated head keep fractions")->delimiter(',');
  sweep_cmd->add_flag("--json", sw.json, "Emit rows as JSON");
  sw.flags.add_to(sweep_cmd);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic clustered dump pair");
  synth_cmd->add_option("--classes", synth.spec.n_classes, "Number of classes")->capture_default_str();
  synth_cmd->add_option("--dim", synth.spec.dim, "Vector width")->capture_default_str();
  synth_cmd->add_option("--per-class", synth.spec.per_class, "Datastore entries per class")->capture_default_str();
  synth_cmd->add_option("--queries-per-class", synth.spec.queries_per_class, "Queries per class")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "Per-coordinate noise sigma")->capture_default_str();
  synth_cmd->add_option("--separation", synth.spec.separation, "Distance between class centers")
      ->capture_default_str();
  synth_cmd->add_option("--heads", synth.spec.heads, "Head count recorded in the manifest")->capture_default_str();
  synth_cmd->add_flag("--redundant-heads", synth.spec.redundant_heads, "Tile one head slice across all heads");
  synth_cmd->add_flag("--uniform-baseline", synth.spec.uniform_baseline, "Attach uniform baselines to queries");
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--output-prefix", synth.output_prefix, "Writes PREFIX.store.jsonl and PREFIX.eval.jsonl")
      ->required();

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Time per-query latency over datastore prefixes");
  bench_cmd->add_option("--store", bn.store, "RTDS datastore")->required();
  bench_cmd->add_option("--dump", bn.dump, "Dump supplying query vectors")->required();
  bench_cmd->add_option("--queries", bn.queries, "Query vectors taken from the dump")->capture_default_str();
  bench_cmd->add_option("--sizes", bn.options.sizes, "Comma-separated prefix sizes")->delimiter(',');
  bench_cmd->add_option("--k", bn.options.k, "Neighbors per query")->capture_default_str();
  bench_cmd->add_option("--temp", bn.options.temperature, "Temperature")->capture_default_str();
  bench_cmd->add_option("--reps", bn.options.repetitions, "Timed repetitions (>= 30)")->capture_default_str();
  bench_cmd->add_flag("--ivf", bn.options.include_ivf, "Also time IVF search");
  bench_cmd->add_option("--lists", bn.options.n_lists, "IVF lists")->capture_default_str();
  bench_cmd->add_option("--nprobe", bn.options.n_probe, "IVF lists probed")->capture_default_str();
  bench_cmd->add_option("--seed", bn.options.seed, "IVF training seed")->capture_default_str();
  bench_cmd->add_option("--keep-fractions", bn.options.head_keep_fractions, "Multi-head keep fractions")
      ->delimiter(',');
  bench_cmd->add_flag("--json", bn.json, "Emit rows as JSON");

  std::vector<std::string> argv_storage = args;
  if (argv_storage.empty()) argv_storage.push_back("rtd");
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (build_cmd->parsed()) return cmd_build(build, out);
    if (index_cmd->parsed()) return cmd_index(index, out);
    if (query_cmd->parsed()) return cmd_query(query, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sw, out);
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
    if (bench_cmd->parsed()) return cmd_bench(bn, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace rtd::cli
