// Copyright 2026 The recapture Authors
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

namespace recap {

/// Failure categories. Values match the status codes of the C API.
enum class ErrorKind {
  Input = 1,            // malformed data, bad configuration, bad arguments
  Domain = 2,           // special function called outside its domain
  Numeric = 3,          // degenerate baseline, singular information, ...
  Identifiability = 4,  // behavioral parameters cannot be estimated
  StepFailure = 5,      // Newton-Raphson could not make progress
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};
struct IdentifiabilityError : Error {
  explicit IdentifiabilityError(const std::string& what)
      : Error(ErrorKind::Identifiability, what) {}
};

}  // namespace recap
