// Copyright 2026 The vflchain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VFLCHAIN_ERRORS_H_
#define VFLCHAIN_ERRORS_H_

#include <stdexcept>

namespace vflchain {

// Bad argument or configuration value.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operand dimensions do not line up.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A participant did something the training protocol forbids (missing cache,
// label it does not hold, incomplete gradient set, ...).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vflchain

#endif  // VFLCHAIN_ERRORS_H_
