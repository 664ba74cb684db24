// SPDX-License-Identifier: Apache-2.0
//
// coopwd: cooperative perception feature recovery over impaired V2V links
// Copyright (C) 2026 The coopwd authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
#pragma once

#include <stdexcept>
#include <string>

namespace coopwd {

/// Invalid configuration, shape, or argument. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A trained model required by a variant is absent. Maps to exit code 3.
class ModelMissingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// NaN, divergence, or a rejected schedule. Maps to exit code 4.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// I/O failures (unwritable directory, truncated file, bad magic).
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace coopwd
