// Copyright 2026 The sps Authors
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

namespace sps {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TruncationError : Error {
  using Error::Error;
};

struct SpaceMismatchError : Error {
  using Error::Error;
};

struct InvalidStateError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// Adaptive integrator could not make progress. `time` is where it stalled.
struct StiffnessError : Error {
  StiffnessError(const std::string& what, double t) : Error(what), time(t) {}
  double time;
};

/// Malformed or unsupported input file. `line` is 1-based, 0 if unknown.
struct SchemaError : ConfigError {
  SchemaError(const std::string& what, long l = 0) : ConfigError(what), line(l) {}
  long line;
};

struct IoError : Error {
  using Error::Error;
};

struct AnalysisError : Error {
  using Error::Error;
};

struct FitError : Error {
  using Error::Error;
};

}  // namespace sps
