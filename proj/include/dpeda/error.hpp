//
// Copyright 2026 The dpeda Authors
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
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpeda {

// Base of every error raised by the library. The `kind()` string is stable and
// is what the CLI and the HTTP layer report to callers.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DPEDA_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

DPEDA_DEFINE_ERROR(SchemaMismatch)
DPEDA_DEFINE_ERROR(DomainError)
DPEDA_DEFINE_ERROR(KindError)
DPEDA_DEFINE_ERROR(InsufficientData)
DPEDA_DEFINE_ERROR(ParamError)
DPEDA_DEFINE_ERROR(TooLarge)
DPEDA_DEFINE_ERROR(EmptyColumn)
DPEDA_DEFINE_ERROR(DegenerateColumn)
DPEDA_DEFINE_ERROR(NotFound)
DPEDA_DEFINE_ERROR(ConfigError)

#undef DPEDA_DEFINE_ERROR

// Unparsable cell under the strict ingestion policy. Rows are 1-based data
// rows (the header is not counted).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& detail)
      : Error("ParseError", "row " + std::to_string(row) + ", column '" +
                                column + "': " + detail),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(double requested, double remaining)
      : Error("BudgetExhausted",
              "privacy budget exhausted: requested " + std::to_string(requested) +
                  ", remaining " + std::to_string(remaining)),
        requested_(requested),
        remaining_(remaining) {}

  double requested() const noexcept { return requested_; }
  double remaining() const noexcept { return remaining_; }

 private:
  double requested_;
  double remaining_;
};

class MissingPrerequisite : public Error {
 public:
  MissingPrerequisite(std::string prerequisite, const std::string& message)
      : Error("MissingPrerequisite", message),
        prerequisite_(std::move(prerequisite)) {}

  const std::string& prerequisite() const noexcept { return prerequisite_; }

 private:
  std::string prerequisite_;
};

}  // namespace dpeda
