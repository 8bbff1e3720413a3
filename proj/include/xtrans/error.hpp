// Copyright 2026 The xtrans Authors
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

namespace xtrans {

/// Base of every exception thrown by the library. The C API maps each
/// subclass onto one status code.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

class VersionError : public Error
{
public:
  using Error::Error;
};

class StateError : public Error
{
public:
  using Error::Error;
};

/// Raised when a loss turns non-finite during optimization.
class DivergenceError : public Error
{
public:
  DivergenceError(const std::string& what, std::string last_good_checkpoint = {})
    : Error(what), last_good_(std::move(last_good_checkpoint))
  {}
  const std::string& last_good_checkpoint() const { return last_good_; }

private:
  std::string last_good_;
};

} // namespace xtrans
