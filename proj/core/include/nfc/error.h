// Copyright 2026 The nfcodec Authors.
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

#ifndef NFC_ERROR_H_
#define NFC_ERROR_H_

#include <stdexcept>
#include <string>

namespace nfc {

// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorCode {
  kUsage = 2,
  kFormat = 3,
  kModelMismatch = 4,
  kNumeric = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline Error UsageError(const std::string& what) {
  return Error(ErrorCode::kUsage, what);
}
inline Error FormatError(const std::string& what) {
  return Error(ErrorCode::kFormat, what);
}
inline Error MismatchError(const std::string& what) {
  return Error(ErrorCode::kModelMismatch, what);
}
inline Error NumericError(const std::string& what) {
  return Error(ErrorCode::kNumeric, what);
}

}  // namespace nfc

#endif  // NFC_ERROR_H_
