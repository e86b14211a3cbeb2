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
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rtd/core.h"
#include "rtd/datastore.h"

namespace rtd {

struct Baseline {
  enum class Space { kLabels, kVocab };
  Space space = Space::kLabels;
  std::vector<double> probs;
  /// label -> token index; used when space is kVocab.
  std::map<std::string, std::size_t> answer_tokens;
};

struct EvalRecord {
  std::string id;
  std::vector<double> hidden_state;
  std::string gold;
  std::vector<std::string> candidates;
  std::optional<Baseline> baseline;
};

/// Sidecar metadata describing a dump.
struct DumpManifest {
  std::size_t model_dim = 0;
  std::size_t n_heads = 1;
  std::vector<std::string> labels;
  std::size_t record_count = 0;
};

struct EvalDump {
  DumpManifest manifest;
  std::vector<EvalRecord> records;

  LabelSpace label_space() const { return LabelSpace::make(manifest.labels); }
};

/// "data/x.jsonl" -> "data/x.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& dump_path);

/// Parses one JSON Lines record. Throws FormatError carrying `line_number`.
EvalRecord parse_record(const std::string& line, std::size_t line_number);
std::string format_record(const EvalRecord& record);

/// Reads a dump and validates it against its manifest when one exists next
/// to it; otherwise infers the manifest (labels in first-seen order, one
/// head). Record invariants are checked per line.
EvalDump read_dump(const std::filesystem::path& path);
EvalDump read_dump(std::istream& in, std::optional<DumpManifest> manifest);

/// Writes the JSONL file and its manifest.
void write_dump(const EvalDump& dump, const std::filesystem::path& path);
void write_records(const EvalDump& dump, std::ostream& out);

DumpManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DumpManifest& manifest, const std::filesystem::path& path);

/// Datastore build input: (hidden_state, gold) per record.
std::vector<LabeledKey> datastore_pairs(const EvalDump& dump);

/// Checks gold in candidates, candidates in labels, finite state of the
/// manifest's width, baseline length. Throws FormatError with the record's line.
void validate_record(const EvalRecord& record, const DumpManifest& manifest, std::size_t line_number);

}  // namespace rtd
