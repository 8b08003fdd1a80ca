// Copyright 2026 The zeroforge Authors
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

namespace zeroforge {

// Bad input to a library call (wrong length, out-of-range parameter, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Leading coefficient too small to form a companion matrix.
class DegeneratePolynomial : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shifted QR did not deflate within its iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two eigenvalues closer than the simple-eigenvalue threshold.
class DegenerateSpectrum : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during optimization.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A BLER curve never crosses the requested target.
class NotBracketed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace zeroforge
