/*
   Copyright 2026 the tokenwalk authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace tokenwalk {

/// Invalid configuration, parameters, or input data. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number of the offending line.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Metric undefined for the given inputs (e.g. zero label energy in NMSE).
class MetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// An inner solver failed to converge; carries the final residual. CLI exit code 2.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + format_residual(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  static std::string format_residual(double r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", r);
    return buf;
  }

  double residual_;
};

/// A runtime descent check failed. CLI exit code 3.
class TheoremViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tokenwalk
