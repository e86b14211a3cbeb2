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

#include "rtd/dump.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace rtd {

using nlohmann::json;

namespace {

[[noreturn]] void format_error(const std::string& message, std::size_t line) {
  throw Error(ErrorCode::kFormatError, "line " + std::to_string(line) + ": " + message, line);
}

std::vector<double> number_array(const json& j, const char* field, std::size_t line) {
  if (!j.is_array()) format_error(std::string("'") + field + "' must be an array of numbers", line);
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) format_error(std::string("'") + field + "' must contain only numbers", line);
    out.push_back(x.get<double>());
  }
  return out;
}

const json& required(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) format_error(std::string("missing field '") + field + "'", line);
  return *it;
}

}  // namespace

std::filesystem::path manifest_path_for(const std::filesystem::path& dump_path) {
  auto p = dump_path;
  p.replace_extension(".manifest.json");
  return p;
}

EvalRecord parse_record(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    format_error(std::string("malformed JSON (") + e.what() + ")", line_number);
  }
  if (!j.is_object()) format_error("record is not a JSON object", line_number);

  EvalRecord rec;
  const auto& id = required(j, "id", line_number);
  const auto& gold = required(j, "gold", line_number);
  const auto& candidates = required(j, "candidates", line_number);
  if (!id.is_string()) format_error("'id' must be a string", line_number);
  if (!gold.is_string()) format_error("'gold' must be a string", line_number);
  if (!candidates.is_array()) format_error("'candidates' must be an array of strings", line_number);
  rec.id = id.get<std::string>();
  rec.gold = gold.get<std::string>();
  rec.hidden_state = number_array(required(j, "hidden_state", line_number), "hidden_state", line_number);
  for (const auto& c : candidates) {
    if (!c.is_string()) format_error("'candidates' must be an array of strings", line_number);
    rec.candidates.push_back(c.get<std::string>());
  }

  if (auto it = j.find("baseline"); it != j.end() && !it->is_null()) {
    const json& b = *it;
    if (!b.is_object()) format_error("'baseline' must be an object", line_number);
    Baseline base;
    const auto& space = required(b, "space", line_number);
    if (space == "labels") {
      base.space = Baseline::Space::kLabels;
    } else if (space == "vocab") {
      base.space = Baseline::Space::kVocab;
    } else {
      format_error("baseline 'space' must be \"labels\" or \"vocab\"", line_number);
    }
    base.probs = number_array(required(b, "probs", line_number), "probs", line_number);
    if (auto at = b.find("answer_tokens"); at != b.end() && !at->is_null()) {
      if (!at->is_object()) format_error("'answer_tokens' must be an object", line_number);
      for (const auto& [label, token] : at->items()) {
        if (!token.is_number_unsigned()) format_error("answer token ids must be non-negative integers", line_number);
        base.answer_tokens[label] = token.get<std::size_t>();
      }
    }
    if (base.space == Baseline::Space::kVocab && base.answer_tokens.empty()) {
      format_error("vocab-space baseline needs 'answer_tokens'", line_number);
    }
    rec.baseline = std::move(base);
  }
  return rec;
}

std::string format_record(const EvalRecord& record) {
  json j = json::object();
  j["id"] = record.id;
  j["hidden_state"] = record.hidden_state;
  j["gold"] = record.gold;
  j["candidates"] = record.candidates;
  if (record.baseline) {
    json b = json::object();
    b["space"] = record.baseline->space == Baseline::Space::kLabels ? "labels" : "vocab";
    b["probs"] = record.baseline->probs;
    if (!record.baseline->answer_tokens.empty()) b["answer_tokens"] = record.baseline->answer_tokens;
    j["baseline"] = std::move(b);
  }
  return j.dump();
}

void validate_record(const EvalRecord& record, const DumpManifest& manifest, std::size_t line_number) {
  if (record.hidden_state.size() != manifest.model_dim) {
    format_error("hidden_state has length " + std::to_string(record.hidden_state.size()) + ", manifest says " +
                     std::to_string(manifest.model_dim),
                 line_number);
  }
  for (double x : record.hidden_state) {
    if (!std::isfinite(x)) format_error("hidden_state has a non-finite entry", line_number);
  }
  std::unordered_set<std::string> labels(manifest.labels.begin(), manifest.labels.end());
  std::set<std::string> seen;
  for (const auto& c : record.candidates) {
    if (!labels.count(c)) format_error("candidate '" + c + "' is not a declared label", line_number);
    if (!seen.insert(c).second) format_error("candidate '" + c + "' listed twice", line_number);
  }
  if (!seen.count(record.gold)) format_error("gold '" + record.gold + "' is not among the candidates", line_number);
  if (record.baseline) {
    const auto& b = *record.baseline;
    if (b.space == Baseline::Space::kLabels && b.probs.size() != manifest.labels.size()) {
      format_error("label-space baseline needs one probability per declared label", line_number);
    }
    for (const auto& [label, token] : b.answer_tokens) {
      if (!labels.count(label)) format_error("answer token for undeclared label '" + label + "'", line_number);
      if (token >= b.probs.size()) format_error("answer token id outside the baseline vocabulary", line_number);
    }
  }
}

EvalDump read_dump(std::istream& in, std::optional<DumpManifest> manifest) {
  EvalDump dump;
  std::string line;
  std::size_t line_number = 0;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    dump.records.push_back(parse_record(line, line_number));
    lines.push_back(line_number);
  }

  if (manifest) {
    dump.manifest = *manifest;
    if (dump.manifest.record_count != dump.records.size()) {
      throw Error(ErrorCode::kFormatError, "manifest declares " + std::to_string(dump.manifest.record_count) +
                                               " records, file has " + std::to_string(dump.records.size()),
                  line_number);
    }
  } else {
    std::vector<std::string> labels;
    std::unordered_set<std::string> seen;
    auto note = [&](const std::string& l) {
      if (seen.insert(l).second) labels.push_back(l);
    };
    for (const auto& r : dump.records) {
      for (const auto& c : r.candidates) note(c);
      note(r.gold);
    }
    dump.manifest.labels = std::move(labels);
    dump.manifest.model_dim = dump.records.empty() ? 0 : dump.records.front().hidden_state.size();
    dump.manifest.n_heads = 1;
    dump.manifest.record_count = dump.records.size();
  }
  for (std::size_t i = 0; i < dump.records.size(); ++i) validate_record(dump.records[i], dump.manifest, lines[i]);
  return dump;
}

DumpManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
    DumpManifest m;
    m.model_dim = j.at("model_dim").get<std::size_t>();
    m.n_heads = j.at("n_heads").get<std::size_t>();
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.record_count = j.at("record_count").get<std::size_t>();
    LabelSpace::make(m.labels);
    HeadLayout::make(m.model_dim, m.n_heads);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, "invalid manifest " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormatError, "invalid manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const DumpManifest& manifest, const std::filesystem::path& path) {
  json j = json::object();
  j["model_dim"] = manifest.model_dim;
  j["n_heads"] = manifest.n_heads;
  j["labels"] = manifest.labels;
  j["record_count"] = manifest.record_count;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

EvalDump read_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open dump " + path.string());
  std::optional<DumpManifest> manifest;
  if (const auto mp = manifest_path_for(path); std::filesystem::exists(mp)) manifest = read_manifest(mp);
  return read_dump(in, manifest);
}

void write_records(const EvalDump& dump, std::ostream& out) {
  for (const auto& r : dump.records) out << format_record(r) << '\n';
}

void write_dump(const EvalDump& dump, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write dump " + path.string());
  write_records(dump, out);
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
  DumpManifest m = dump.manifest;
  m.record_count = dump.records.size();
  write_manifest(m, manifest_path_for(path));
}

std::vector<LabeledKey> datastore_pairs(const EvalDump& dump) {
  std::vector<LabeledKey> pairs;
  pairs.reserve(dump.records.size());
  for (const auto& r : dump.records) pairs.push_back({r.hidden_state, r.gold});
  return pairs;
}

}  // namespace rtd
