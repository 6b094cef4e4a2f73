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
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpeda/accountant.hpp"
#include "dpeda/core.hpp"
#include "dpeda/eda.hpp"
#include "dpeda/error.hpp"
#include "dpeda/mechanisms.hpp"
#include "dpeda/random.hpp"
#include "dpeda/synthesizer.hpp"

namespace dpeda {

// |noisy - truth| / max(|truth|, floor).
inline double relative_error(double true_value, double noisy_value, double floor = 1.0) {
  if (!(floor > 0.0)) throw ParamError("relative_error: floor must be > 0");
  return std::fabs(noisy_value - true_value) / std::max(std::fabs(true_value), floor);
}

struct FiveNumberSummary {
  std::size_t count = 0;
  double min = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
};

// Box-plot summary of the finite entries (NaN marks an undefined error).
inline FiveNumberSummary five_number_summary(const std::vector<double>& values) {
  std::vector<double> xs;
  for (double v : values)
    if (std::isfinite(v)) xs.push_back(v);
  FiveNumberSummary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  std::sort(xs.begin(), xs.end());
  s.min = xs.front();
  s.q1 = stats::quantile(xs, 0.25);
  s.median = stats::quantile(xs, 0.5);
  s.q3 = stats::quantile(xs, 0.75);
  s.max = xs.back();
  return s;
}

// ---------------------------------------------------------------------------
// Cumulative privacy loss
// ---------------------------------------------------------------------------

struct BudgetInput {
  std::string name;
  Dataset data;
};

struct BudgetSeries {
  std::string schema;
  std::size_t numeric = 0;
  std::size_t categorical = 0;
  BudgetBreakdown closed_form;
  LedgerReport ledger;
  bool completed = false;
  bool matches_closed_form = false;
  std::string error;  // set when the EDA was refused
};

inline std::string function_of_label(const std::string& label) {
  return label.substr(0, label.find('('));
}

// Runs the basic EDA on every input and records the cumulative ledger.
// `total_budget` <= 0 means "exactly the closed-form requirement".
inline std::vector<BudgetSeries> run_budget_experiment(const std::vector<BudgetInput>& inputs,
                                                       double eps_i, double total_budget,
                                                       std::uint64_t seed) {
  std::vector<BudgetSeries> out;
  for (const auto& in : inputs) {
    BudgetSeries s;
    s.schema = in.name;
    s.numeric = in.data.schema().numeric_count();
    s.categorical = in.data.schema().categorical_count();
    s.closed_form = budget_closed_form(s.numeric, s.categorical, eps_i);
    double budget = total_budget > 0.0 ? total_budget : s.closed_form.total;
    if (!(budget > 0.0)) budget = 1.0;
    Ledger ledger(budget);
    NoiseSource noise(derive_rng(seed, out.size()), {});
    try {
      run_basic_eda(in.data, eps_i, ledger, noise);
      s.completed = true;
    } catch (const BudgetExhausted& e) {
      s.error = e.what();
    }
    s.ledger = ledger.report();
    s.matches_closed_form = s.completed && s.ledger.spent == s.closed_form.total;
    out.push_back(std::move(s));
  }
  return out;
}

// schema,index,function,label,epsilon,cumulative,closed_form_total
inline void write_budget_csv(std::ostream& out, const std::vector<BudgetSeries>& series) {
  out << "schema,index,function,label,epsilon,cumulative,closed_form_total\n";
  for (const auto& s : series) {
    for (const auto& row : s.ledger.rows) {
      out << csv_escape(s.schema) << ',' << row.index << ',' << function_of_label(row.label) << ','
          << csv_escape(row.label) << ',' << format_real(row.epsilon) << ','
          << format_real(row.cumulative) << ',' << format_real(s.closed_form.total) << '\n';
    }
  }
}

// schema,numeric,categorical,dist,miss,outl,corr,total,ledger_total,completed
inline void write_budget_totals_csv(std::ostream& out, const std::vector<BudgetSeries>& series) {
  out << "schema,numeric,categorical,dist,miss,outl,corr,total,ledger_total,completed\n";
  for (const auto& s : series) {
    const auto& b = s.closed_form;
    out << csv_escape(s.schema) << ',' << s.numeric << ',' << s.categorical << ','
        << format_real(b.dist) << ',' << format_real(b.miss) << ',' << format_real(b.outl) << ','
        << format_real(b.corr) << ',' << format_real(b.total) << ','
        << format_real(s.ledger.spent) << ',' << (s.completed ? "true" : "false") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Accuracy: interactive vs synthetic
// ---------------------------------------------------------------------------

enum class ExperimentMode { kInteractive, kSynthetic, kBoth };

struct AccuracyConfig {
  std::string schema_name = "schema";
  double eps_i = 0.01;
  double total_budget = 0.0;                 // <= 0: closed-form requirement
  std::vector<std::uint64_t> seeds = {1};
  ExperimentMode mode = ExperimentMode::kBoth;
  std::optional<double> synth_epsilon;       // default: the CORR closed form
  std::size_t degree = 4;
  std::size_t bins = 20;
  std::optional<std::string> missing_column; // default: first numeric column
  double missing_fraction = 0.10;
  bool add_noise = true;
  bool test_mode = false;                    // serialize true/released values
  EdaConfig eda;
};

struct ErrorRecord {
  std::string schema;
  std::string function;
  std::string column;     // "a;b" for pairs
  std::string statistic;  // min/max/q1/q2/q3, category label, count, spearman, cramers_v
  std::string mode;       // interactive | synthetic
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  double error = 0.0;     // NaN when the released statistic is undefined
  std::optional<double> error_rangenorm;
  double true_value = 0.0;
  double released_value = 0.0;
};

struct AccuracyResult {
  std::vector<ErrorRecord> records;
  double synth_epsilon = 0.0;
  BudgetBreakdown closed_form;
};

namespace detail {

inline void append_errors(std::vector<ErrorRecord>& out, const Schema& schema,
                          const EdaReport& truth, const EdaReport& released,
                          const std::string& schema_name, const std::string& mode,
                          std::uint64_t seed, std::optional<double> epsilon_override) {
  if (truth.entries.size() != released.entries.size()) {
    throw ParamError("accuracy: query inventories differ");
  }
  for (std::size_t i = 0; i < truth.entries.size(); ++i) {
    const EdaEntry& t = truth.entries[i];
    const EdaEntry& r = released.entries[i];
    std::string column;
    for (const auto& c : t.columns) column += (column.empty() ? "" : ";") + c;
    std::optional<double> range;
    if (t.function == "DIST" && t.columns.size() == 1) {
      const ColumnSpec& spec = schema.column(schema.index_of(t.columns[0]));
      if (spec.is_numeric()) range = spec.bounds.width();
    }
    for (std::size_t k = 0; k < t.values.size(); ++k) {
      ErrorRecord rec;
      rec.schema = schema_name;
      rec.function = t.function;
      rec.column = column;
      rec.statistic = t.values[k].statistic;
      rec.mode = mode;
      rec.seed = seed;
      const auto& tv = t.values[k].value;
      const auto& rv = r.values[k].value;
      rec.epsilon = epsilon_override ? *epsilon_override : (rv ? rv->params.epsilon() : 0.0);
      rec.true_value = tv ? tv->value : std::nan("");
      rec.released_value = rv ? rv->value : std::nan("");
      if (tv && rv) {
        rec.error = relative_error(tv->value, rv->value);
        if (range) rec.error_rangenorm = std::fabs(rv->value - tv->value) / *range;
      } else {
        rec.error = std::nan("");
      }
      out.push_back(std::move(rec));
    }
  }
}

}  // namespace detail

// Per seed: inject missingness into one numeric column, run the interactive
// EDA (noisy, metered) and/or synthesize at the matched budget and run the
// plain EDA on the synthetic table; every released scalar yields one error
// record against the noise-free EDA of the (injected) original.
inline AccuracyResult run_accuracy_experiment(const Dataset& ds, const AccuracyConfig& config) {
  if (config.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (!(config.eps_i > 0.0)) throw ConfigError("eps_i: must be > 0");
  if (config.degree < 1) throw ConfigError("degree: must be >= 1");
  if (config.bins < 2) throw ConfigError("bins: must be >= 2");
  const Schema& schema = ds.schema();

  AccuracyResult result;
  result.closed_form =
      budget_closed_form(schema.numeric_count(), schema.categorical_count(), config.eps_i);
  const bool run_interactive = config.mode != ExperimentMode::kSynthetic;
  const bool run_synthetic = config.mode != ExperimentMode::kInteractive;
  if (run_synthetic) {
    result.synth_epsilon = config.synth_epsilon.value_or(result.closed_form.corr);
    if (!(result.synth_epsilon > 0.0)) {
      throw ConfigError("synth-eps: must be > 0 (the CORR budget of this schema is 0)");
    }
  }

  std::optional<std::string> missing_column = config.missing_column;
  if (!missing_column) {
    const auto numeric = schema.numeric_indices();
    if (!numeric.empty()) missing_column = schema.column(numeric.front()).name;
  } else if (!schema.find(*missing_column)) {
    throw ConfigError("missing-column: unknown column '" + *missing_column + "'");
  }
  const double huge_budget = std::max(1.0, result.closed_form.total * 2.0);

  auto run_seed = [&](std::uint64_t seed) {
    std::vector<ErrorRecord> records;
    const Dataset data = missing_column
                             ? inject_missing(ds, *missing_column, config.missing_fraction,
                                              derive_rng(seed, 0)())
                             : ds;
    Ledger truth_ledger(huge_budget);
    NoiseSource exact(derive_rng(seed, 1), {false, true});
    const EdaReport truth = run_basic_eda(data, config.eps_i, truth_ledger, exact, config.eda);

    if (run_interactive) {
      const double budget =
          config.total_budget > 0.0 ? config.total_budget : std::max(result.closed_form.total, 1e-300);
      Ledger ledger(budget);
      NoiseSource noise(derive_rng(seed, 2), {config.add_noise, true});
      const EdaReport released = run_basic_eda(data, config.eps_i, ledger, noise, config.eda);
      if (ledger.spent() != result.closed_form.total) {
        throw ParamError("interactive ledger diverged from the closed-form budget");
      }
      detail::append_errors(records, schema, truth, released, config.schema_name, "interactive",
                            seed, std::nullopt);
    }
    if (run_synthetic) {
      Rng rng = derive_rng(seed, 3);
      SynthesizerConfig sc;
      sc.degree = config.degree;
      sc.bins = config.bins;
      sc.add_noise = config.add_noise;
      const auto syn = synthesize(data, result.synth_epsilon, config.degree, rng, sc);
      Ledger scratch(huge_budget);
      NoiseSource plain(derive_rng(seed, 4), {false, true});
      const EdaReport released = run_basic_eda(syn.data, config.eps_i, scratch, plain, config.eda);
      detail::append_errors(records, schema, truth, released, config.schema_name, "synthetic",
                            seed, result.synth_epsilon);
    }
    return records;
  };

  std::vector<std::future<std::vector<ErrorRecord>>> jobs;
  for (auto seed : config.seeds) jobs.push_back(std::async(std::launch::async, run_seed, seed));
  for (auto& job : jobs) {
    auto part = job.get();
    result.records.insert(result.records.end(), std::make_move_iterator(part.begin()),
                          std::make_move_iterator(part.end()));
  }
  return result;
}

// schema,function,column,statistic,mode,seed,epsilon,error,error_rangenorm
// plus true_value,released_value when `include_values` (test mode only).
inline void write_errors_csv(std::ostream& out, const std::vector<ErrorRecord>& records,
                             bool include_values) {
  out << "schema,function,column,statistic,mode,seed,epsilon,error,error_rangenorm";
  if (include_values) out << ",true_value,released_value";
  out << '\n';
  for (const auto& r : records) {
    out << csv_escape(r.schema) << ',' << r.function << ',' << csv_escape(r.column) << ','
        << csv_escape(r.statistic) << ',' << r.mode << ',' << r.seed << ','
        << format_real(r.epsilon) << ',' << format_real(r.error) << ','
        << (r.error_rangenorm ? format_real(*r.error_rangenorm) : "");
    if (include_values) {
      out << ',' << format_real(r.true_value) << ',' << format_real(r.released_value);
    }
    out << '\n';
  }
}

struct SummaryRow {
  std::string function;
  std::string mode;
  FiveNumberSummary error;
};

inline std::vector<SummaryRow> summarize(const std::vector<ErrorRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : records) groups[{r.function, r.mode}].push_back(r.error);
  std::vector<SummaryRow> out;
  for (const auto& [key, errors] : groups) {
    out.push_back({key.first, key.second, five_number_summary(errors)});
  }
  return out;
}

// function,mode,count,min,q1,median,q3,max
inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "function,mode,count,min,q1,median,q3,max\n";
  for (const auto& r : rows) {
    out << r.function << ',' << r.mode << ',' << r.error.count << ',' << format_real(r.error.min)
        << ',' << format_real(r.error.q1) << ',' << format_real(r.error.median) << ','
        << format_real(r.error.q3) << ',' << format_real(r.error.max) << '\n';
  }
}

}  // namespace dpeda
