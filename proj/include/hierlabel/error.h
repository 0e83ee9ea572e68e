// Copyright 2026 The hierlabel Authors
// SPDX-License-Identifier: Apache-2.0
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

#ifndef HIERLABEL_ERROR_H_
#define HIERLABEL_ERROR_H_

#include <stdexcept>
#include <string>

namespace hierlabel {

enum class ErrorKind {
  kInvalidArgument,  // bad configuration or caller input
  kParse,            // malformed document (position in message)
  kStructure,        // well-formed document describing an invalid tree
  kUnknownNode,
  kNotALeaf,
  kShapeMismatch,
  kMissingFile,
  kCorruptFile,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit status for the CLI: 2 invalid input, 3 missing or corrupt
// file, 4 internal invariant violation.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingFile:
    case ErrorKind::kCorruptFile:
      return 3;
    case ErrorKind::kInternal:
      return 4;
    default:
      return 2;
  }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace hierlabel

#endif  // HIERLABEL_ERROR_H_
