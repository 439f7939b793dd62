// clickadapt/include/clickadapt/errors.h

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CLICKADAPT_ERRORS_H_
#define CLICKADAPT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace clickadapt {

enum class ErrorCode {
  kShapeMismatch,
  kLabelOutOfRange,
  kOutOfBounds,
  kInvalidArgument,
  kDuplicateClick,
  kEmptyClickSet,
  kNoActiveTerm,
  kNonFiniteGradient,
  kCorruptCheckpoint,
  kEmptyForeground,
  kNoError,
  kMissingFinalMask,
  kBadImage,
  kIo,
  kConfig,
  kSessionNotFound,
  kConcurrentClick,
  kNoModelLoaded,
  kSessionClosed,
  kNotSupported,
  kImageAlreadySet,
};

const char *ToString(ErrorCode code);

// Every failure the library reports is an Error carrying a stable code; the
// CLI and the HTTP layer map codes to exit statuses and response codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace clickadapt

#endif  // CLICKADAPT_ERRORS_H_
