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

#include <cmath>
#include <random>

#include "rtd/eval.h"

namespace rtd {
namespace {

// Gram-Schmidt on Gaussian draws: n mutually orthonormal vectors of length dim.
std::vector<std::vector<double>> orthonormal_directions(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  while (basis.size() < n) {
    std::vector<double> v(dim);
    for (double& x : v) x = gauss(rng);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += v[j] * b[j];
      for (std::size_t j = 0; j < dim; ++j) v[j] -= dot * b[j];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-9) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_classes < 2) throw Error(ErrorCode::kInvalidSpec, "need at least two classes");
  if (spec.dim == 0 || spec.heads == 0 || spec.dim % spec.heads != 0) {
    throw Error(ErrorCode::kInvalidSpec, "dim must be a positive multiple of heads");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw Error(ErrorCode::kInvalidSpec, "noise_sigma must be a finite nonnegative number");
  }
  if (!(spec.separation > 0.0) || !std::isfinite(spec.separation)) {
    throw Error(ErrorCode::kInvalidSpec, "separation must be positive");
  }
  if (spec.per_class == 0) throw Error(ErrorCode::kInvalidSpec, "per_class must be positive");
  const std::size_t draw_dim = spec.redundant_heads ? spec.dim / spec.heads : spec.dim;
  if (spec.n_classes > draw_dim) {
    throw Error(ErrorCode::kInvalidSpec, "need at least as many drawn dimensions as classes");
  }

  std::mt19937_64 rng(seed);
  // Orthonormal directions scaled by s / sqrt(2) sit pairwise exactly s apart.
  auto centers = orthonormal_directions(spec.n_classes, draw_dim, rng);
  for (auto& c : centers) {
    for (double& x : c) x *= spec.separation / std::sqrt(2.0);
  }

  std::vector<std::string> labels;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    labels.push_back(spec.n_classes <= 26 ? std::string(1, static_cast<char>('A' + c)) : "C" + std::to_string(c));
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  auto sample = [&](std::size_t cls) {
    std::vector<double> drawn(draw_dim);
    for (std::size_t j = 0; j < draw_dim; ++j) drawn[j] = centers[cls][j] + spec.noise_sigma * noise(rng);
    if (!spec.redundant_heads) return drawn;
    std::vector<double> tiled;
    tiled.reserve(spec.dim);
    for (std::size_t h = 0; h < spec.heads; ++h) tiled.insert(tiled.end(), drawn.begin(), drawn.end());
    return tiled;
  };

  DumpManifest manifest{spec.dim, spec.heads, labels, 0};
  SynthData out;
  out.store_dump.manifest = manifest;
  out.queries.manifest = manifest;
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      out.store_dump.records.push_back(
          {"s" + std::to_string(out.store_dump.records.size()), sample(c), labels[c], labels, std::nullopt});
    }
  }
  for (std::size_t i = 0; i < spec.queries_per_class; ++i) {
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      EvalRecord rec{"q" + std::to_string(out.queries.records.size()), sample(c), labels[c], labels, std::nullopt};
      if (spec.uniform_baseline) {
        rec.baseline = Baseline{Baseline::Space::kLabels,
                                std::vector<double>(labels.size(), 1.0 / static_cast<double>(labels.size())),
                                {}};
      }
      out.queries.records.push_back(std::move(rec));
    }
  }
  out.store_dump.manifest.record_count = out.store_dump.records.size();
  out.queries.manifest.record_count = out.queries.records.size();
  return out;
}

}  // namespace rtd
