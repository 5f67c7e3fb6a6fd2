// Copyright 2026-present the streamlvq authors
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
#include <string>
#include <string_view>

namespace streamlvq {

// All similarity kernels are "higher is better". Euclidean is exposed as the
// negated squared distance.
enum class Metric : std::uint8_t { euclidean = 0, inner_product = 1, cosine = 2 };

Metric parse_metric(std::string_view name);
std::string to_string(Metric metric);

}  // namespace streamlvq
