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

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "dpeda/core.hpp"
#include "dpeda/error.hpp"
#include "dpeda/exact_sum.hpp"
#include "json.hpp"

namespace dpeda {

enum class Composition { kSequential, kParallelGroup };

inline std::string_view to_string(Composition c) {
  return c == Composition::kSequential ? "sequential" : "parallel";
}

// Slack on the budget comparison that absorbs rounding in the caller's own
// arithmetic. Strict excess beyond it is refused.
inline constexpr double kBudgetTolerance = 1e-12;

struct ChargeRequest {
  double epsilon = 0.0;
  std::string label;
  Composition composition = Composition::kSequential;
  // Number of disjoint sub-queries a parallel-group charge stands for.
  std::size_t group_size = 1;
};

struct Charge {
  std::size_t index = 0;  // ordinal timestamp, 0-based
  double epsilon = 0.0;
  std::string label;
  Composition composition = Composition::kSequential;
  std::size_t group_size = 1;
};

struct ChargeOutcome {
  bool accepted = false;
  double remaining = 0.0;

  explicit operator bool() const { return accepted; }
};

struct LedgerReportRow {
  std::size_t index = 0;
  std::string label;
  double epsilon = 0.0;
  double cumulative = 0.0;
  Composition composition = Composition::kSequential;
};

struct LedgerReport {
  double budget = 0.0;
  double spent = 0.0;
  double remaining = 0.0;
  std::vector<LedgerReportRow> rows;
};

// Parallel composition over disjoint partitions: the group costs the largest
// member epsilon.
inline ChargeRequest parallel_group(const std::vector<double>& member_epsilons, std::string label) {
  if (member_epsilons.empty()) throw ParamError("parallel group needs at least one member");
  ChargeRequest req;
  req.epsilon = *std::max_element(member_epsilons.begin(), member_epsilons.end());
  req.label = std::move(label);
  req.composition = Composition::kParallelGroup;
  req.group_size = member_epsilons.size();
  return req;
}

// Privacy-budget ledger. `charge` and `charge_all` are atomic check-and-debit
// operations; the spent total is the correctly rounded exact sum of the
// accepted charges, so it never drifts from its entries.
class Ledger {
 public:
  using Listener = std::function<void(const Charge&)>;

  explicit Ledger(double budget, Listener on_accept = {})
      : budget_(budget), on_accept_(std::move(on_accept)) {
    if (!(budget > 0.0) || !std::isfinite(budget)) {
      throw ParamError("privacy budget must be finite and > 0");
    }
  }

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  double budget() const { return budget_; }

  double spent() const {
    std::lock_guard lock(mu_);
    return spent_.value();
  }

  double remaining() const {
    std::lock_guard lock(mu_);
    return remaining_locked();
  }

  // True when `epsilon` more could be debited right now.
  bool can_absorb(double epsilon) const {
    std::lock_guard lock(mu_);
    return fits_locked(epsilon);
  }

  ChargeOutcome charge(double epsilon, std::string label,
                       Composition composition = Composition::kSequential) {
    return charge_all({ChargeRequest{epsilon, std::move(label), composition, 1}});
  }

  ChargeOutcome charge(ChargeRequest request) { return charge_all({std::move(request)}); }

  // All-or-nothing: either every request is debited or the ledger is left
  // untouched.
  ChargeOutcome charge_all(const std::vector<ChargeRequest>& requests) {
    for (const auto& r : requests) {
      if (!(r.epsilon > 0.0) || !std::isfinite(r.epsilon)) {
        throw ParamError("charge epsilon must be finite and > 0");
      }
    }
    std::lock_guard lock(mu_);
    if (!fits_locked(requests)) return {false, remaining_locked()};
    for (const auto& r : requests) {
      Charge c{charges_.size(), r.epsilon, r.label, r.composition, r.group_size};
      spent_.add(r.epsilon);
      charges_.push_back(c);
      if (on_accept_) on_accept_(charges_.back());
    }
    return {true, remaining_locked()};
  }

  // Like charge_all, but raises BudgetExhausted on refusal.
  void require(const std::vector<ChargeRequest>& requests) {
    ExactSum total;
    for (const auto& r : requests) total.add(r.epsilon);
    const auto outcome = charge_all(requests);
    if (!outcome) throw BudgetExhausted(total.value(), outcome.remaining);
  }

  std::vector<Charge> charges() const {
    std::lock_guard lock(mu_);
    return charges_;
  }

  // Snapshot of the charge list with running cumulative sums.
  LedgerReport report() const {
    std::lock_guard lock(mu_);
    LedgerReport out;
    out.budget = budget_;
    out.spent = spent_.value();
    out.remaining = remaining_locked();
    ExactSum running;
    for (const auto& c : charges_) {
      running.add(c.epsilon);
      out.rows.push_back({c.index, c.label, c.epsilon, running.value(), c.composition});
    }
    return out;
  }

 private:
  double remaining_locked() const { return std::max(0.0, budget_ - spent_.value()); }

  bool fits_locked(double epsilon) const {
    ExactSum next = spent_;
    next.add(epsilon);
    return next.value() <= budget_ + kBudgetTolerance;
  }

  bool fits_locked(const std::vector<ChargeRequest>& requests) const {
    ExactSum next = spent_;
    for (const auto& r : requests) next.add(r.epsilon);
    return next.value() <= budget_ + kBudgetTolerance;
  }

  const double budget_;
  Listener on_accept_;
  mutable std::mutex mu_;
  ExactSum spent_;
  std::vector<Charge> charges_;
};

inline nlohmann::json to_json(const LedgerReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"index", r.index},
                    {"label", r.label},
                    {"epsilon", r.epsilon},
                    {"cumulative", r.cumulative},
                    {"composition", std::string(to_string(r.composition))}});
  }
  return {{"budget", report.budget},
          {"spent", report.spent},
          {"remaining", report.remaining},
          {"charges", std::move(rows)}};
}

// index,label,epsilon,cumulative
inline void write_ledger_csv(std::ostream& out, const LedgerReport& report) {
  out << "index,label,epsilon,cumulative\n";
  for (const auto& r : report.rows) {
    out << r.index << ',' << csv_escape(r.label) << ',' << format_real(r.epsilon) << ','
        << format_real(r.cumulative) << '\n';
  }
}

}  // namespace dpeda
