// Copyright 2026 The occflow Authors
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

#ifndef OCCFLOW__ERRORS_HPP_
#define OCCFLOW__ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace occflow
{

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
class DimensionError : public Error
{
public:
  using Error::Error;
};

/// Invalid hyperparameters or module wiring.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Precondition of an operation violated by the caller.
class ContractError : public Error
{
public:
  using Error::Error;
};

/// Malformed or truncated serialized data.
class CorruptionError : public Error
{
public:
  using Error::Error;
};

/// Serialized data written for a different format version or model config.
class VersionError : public CorruptionError
{
public:
  using CorruptionError::CorruptionError;
};

class IoError : public Error
{
public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error
{
public:
  TrainingError(const std::string & what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

}  // namespace occflow

#endif  // OCCFLOW__ERRORS_HPP_
