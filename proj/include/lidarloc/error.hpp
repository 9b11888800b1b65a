// Copyright 2026 The lidarloc Authors
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

namespace lidarloc {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kDomain,
  kInsufficientData,
  kRankDeficient,
  kDegenerateFit,
  kGraphIntegrity,
  kConfig,
  kIo,
  kEstimation,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define LIDARLOC_DEFINE_ERROR(Name, Code)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  };

LIDARLOC_DEFINE_ERROR(InvalidArgumentError, kInvalidArgument)
LIDARLOC_DEFINE_ERROR(DomainError, kDomain)
LIDARLOC_DEFINE_ERROR(InsufficientDataError, kInsufficientData)
LIDARLOC_DEFINE_ERROR(RankDeficiencyError, kRankDeficient)
LIDARLOC_DEFINE_ERROR(DegenerateFitError, kDegenerateFit)
LIDARLOC_DEFINE_ERROR(GraphIntegrityError, kGraphIntegrity)
LIDARLOC_DEFINE_ERROR(ConfigError, kConfig)
LIDARLOC_DEFINE_ERROR(IoError, kIo)
LIDARLOC_DEFINE_ERROR(EstimationError, kEstimation)

#undef LIDARLOC_DEFINE_ERROR

}  // namespace lidarloc
