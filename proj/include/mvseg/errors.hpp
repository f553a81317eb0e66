// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Error categories the CLI maps to exit codes: config 2, data 3, numeric 4.
#pragma once

#include <stdexcept>

namespace mvseg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required (diverged training etc.).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mvseg
