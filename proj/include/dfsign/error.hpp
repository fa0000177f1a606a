// dfsign/error.hpp

// Copyright 2026 The dfsign Authors
//
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

#pragma once

#include <stdexcept>
#include <string>

namespace dfsign {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Upper/lower region split or band subdivision is not feasible.
class DivisionError : public Error {
 public:
  using Error::Error;
};

/// Sequence too short for a temporal op.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// No CTC alignment exists for the target at this input length.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

/// Framewise labels with no non-blank frame cannot be densified.
class DensifyError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

/// WER is undefined for an empty reference.
class UndefinedWerError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed config, spec, manifest or annotation content.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfsign
