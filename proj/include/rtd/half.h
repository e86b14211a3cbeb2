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

#include <cstdint>

namespace rtd {

// IEEE 754 binary16 <-> binary32 conversion. Narrowing rounds to nearest,
// ties to even; overflow saturates to infinity; NaN stays NaN.
std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t bits);

/// Rounds a float to the nearest value representable in binary16.
inline float quantize_half(float value) { return half_to_float(float_to_half(value)); }

}  // namespace rtd
