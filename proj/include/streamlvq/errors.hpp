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

#include <stdexcept>
#include <string>

namespace streamlvq {

// Invalid caller input: bad sizes, out-of-range parameters, unknown ids.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed bytes on disk or in memory.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not valid for the object's current state (e.g. a two-level
// decode of a one-level encoding).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace streamlvq
