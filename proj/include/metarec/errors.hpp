// Copyright 2026 The metarec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace metarec {

// Base of every error raised by the library. Callers that only need a message
// can catch this; callers that branch on the failure catch the subclass.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define METAREC_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

// catalog
METAREC_DEFINE_ERROR(ParseError);
METAREC_DEFINE_ERROR(SchemaError);
METAREC_DEFINE_ERROR(ValidationError);
METAREC_DEFINE_ERROR(UnknownFeature);
METAREC_DEFINE_ERROR(KindMismatch);
METAREC_DEFINE_ERROR(IoError);

// promptc
METAREC_DEFINE_ERROR(EmptyColumn);
METAREC_DEFINE_ERROR(MissingThresholds);

// encoder
METAREC_DEFINE_ERROR(ConfigError);
METAREC_DEFINE_ERROR(BackendUnavailable);
METAREC_DEFINE_ERROR(DimensionMismatch);

// index
METAREC_DEFINE_ERROR(ZeroVector);
METAREC_DEFINE_ERROR(EmptyIndex);
METAREC_DEFINE_ERROR(DuplicateId);
METAREC_DEFINE_ERROR(FormatError);

// rerank
METAREC_DEFINE_ERROR(MissingPrompt);

// evalkit
METAREC_DEFINE_ERROR(RaggedRecords);

#undef METAREC_DEFINE_ERROR

}  // namespace metarec
