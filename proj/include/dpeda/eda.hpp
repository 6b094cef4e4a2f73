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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpeda/accountant.hpp"
#include "dpeda/core.hpp"
#include "dpeda/error.hpp"
#include "dpeda/mechanisms.hpp"
#include "json.hpp"

namespace dpeda {

enum class QuantileMode {
  kLaplace,      // f + Lap((U - L) / eps) on the interpolated order statistic
  kExponential,  // exponential mechanism over inter-sample intervals
};

struct EdaConfig {
  std::size_t spearman_bins = 16;
  QuantileMode quantile_mode = QuantileMode::kLaplace;
};

// ---------------------------------------------------------------------------
// Plain (noise-free) statistics shared by the private queries.
// ---------------------------------------------------------------------------
namespace stats {

inline std::vector<double> sorted_present(const NumericColumn& col) {
  std::vector<double> out;
  out.reserve(col.size());
  for (const auto& v : col)
    if (v) out.push_back(*v);
  std::sort(out.begin(), out.end());
  return out;
}

// Linear interpolation between the closest order statistics:
// h = (N - 1) p, Q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw EmptyColumn("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Equal-width bin over the declared bounds; the last bin is right-closed.
inline std::size_t bin_of(double value, Bounds bounds, std::size_t bins) {
  const double t = (value - bounds.lower) / bounds.width();
  const auto raw = static_cast<long long>(std::floor(t * static_cast<double>(bins)));
  return static_cast<std::size_t>(std::clamp<long long>(raw, 0, static_cast<long long>(bins) - 1));
}

// Row-major contingency table.
struct Table {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cells;

  Table() = default;
  Table(std::size_t r, std::size_t c) : rows(r), cols(c), cells(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return cells[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }

  std::vector<double> row_sums() const {
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i] += at(i, j);
    return out;
  }
  std::vector<double> col_sums() const {
    std::vector<double> out(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[j] += at(i, j);
    return out;
  }
};

inline Table binned_joint(const NumericColumn& a, Bounds ba, const NumericColumn& b, Bounds bb,
                          std::size_t bins) {
  Table t(bins, bins);
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (!a[r] || !b[r]) continue;
    t.at(bin_of(*a[r], ba, bins), bin_of(*b[r], bb, bins)) += 1.0;
  }
  return t;
}

inline Table contingency(const CategoricalColumn& a, std::size_t ka, const CategoricalColumn& b,
                         std::size_t kb) {
  Table t(ka, kb);
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (!a[r] || !b[r]) continue;
    t.at(*a[r], *b[r]) += 1.0;
  }
  return t;
}

namespace detail {
inline std::vector<double> midranks(const std::vector<double>& mass) {
  std::vector<double> out(mass.size());
  double before = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    out[i] = before + mass[i] / 2.0;
    before += mass[i];
  }
  return out;
}
inline std::size_t occupied(const std::vector<double>& mass) {
  return static_cast<std::size_t>(
      std::count_if(mass.begin(), mass.end(), [](double m) { return m > 0.0; }));
}
}  // namespace detail

// Spearman's rho of a (possibly fractional, non-negative) joint table: the
// Pearson correlation of bin midranks weighted by cell mass. Undefined when
// either marginal has all of its mass in a single bin.
inline std::optional<double> spearman_from_table(const Table& t) {
  const auto ra = t.row_sums();
  const auto rb = t.col_sums();
  if (detail::occupied(ra) < 2 || detail::occupied(rb) < 2) return std::nullopt;
  const auto ma = detail::midranks(ra);
  const auto mb = detail::midranks(rb);
  double total = 0.0, mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    total += ra[i];
    mean_a += ra[i] * ma[i];
  }
  for (std::size_t j = 0; j < t.cols; ++j) mean_b += rb[j] * mb[j];
  mean_a /= total;
  mean_b /= total;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    var_a += ra[i] * (ma[i] - mean_a) * (ma[i] - mean_a);
    for (std::size_t j = 0; j < t.cols; ++j) {
      cov += t.at(i, j) * (ma[i] - mean_a) * (mb[j] - mean_b);
    }
  }
  for (std::size_t j = 0; j < t.cols; ++j) var_b += rb[j] * (mb[j] - mean_b) * (mb[j] - mean_b);
  if (!(var_a > 0.0) || !(var_b > 0.0)) return std::nullopt;
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

// Cramer's V with expected counts taken from the table's own marginals.
// Cells whose expected count is below 1e-6 are skipped; the grand total in the
// denominator is floored at 1.
inline double cramers_v_from_table(const Table& t) {
  const auto rs = t.row_sums();
  const auto cs = t.col_sums();
  double total = 0.0;
  for (double r : rs) total += r;
  double chi2 = 0.0;
  if (total > 0.0) {
    for (std::size_t i = 0; i < t.rows; ++i) {
      for (std::size_t j = 0; j < t.cols; ++j) {
        const double expected = rs[i] * cs[j] / total;
        if (expected < 1e-6) continue;
        const double d = t.at(i, j) - expected;
        chi2 += d * d / expected;
      }
    }
  }
  const double q = static_cast<double>(std::min(t.rows, t.cols) - 1);
  const double v = std::sqrt(chi2 / (std::max(total, 1.0) * q));
  return std::clamp(v, 0.0, 1.0);
}

inline std::size_t count_outside(const NumericColumn& col, double q1, double q3) {
  const double lo_q = std::min(q1, q3);
  const double hi_q = std::max(q1, q3);
  const double tolerance = 1.5 * (hi_q - lo_q);
  const double lo = lo_q - tolerance;
  const double hi = hi_q + tolerance;
  std::size_t n = 0;
  for (const auto& v : col)
    if (v && (*v < lo || *v > hi)) ++n;
  return n;
}

}  // namespace stats

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct DistNumericResult {
  std::string column;
  NoisyValue min;
  NoisyValue max;
  NoisyValue q1;
  NoisyValue q2;
  NoisyValue q3;
};

struct HistogramResult {
  std::string column;
  std::vector<std::string> labels;  // domain labels followed by "(missing)"
  std::vector<NoisyValue> counts;   // raw noisy counts, may be negative
  double epsilon_charged = 0.0;

  std::vector<double> nonnegative() const {
    std::vector<double> out;
    out.reserve(counts.size());
    for (const auto& c : counts) out.push_back(std::max(0.0, c.value));
    return out;
  }
};

struct CorrelationResult {
  std::string column_a;  // canonical order: column_a < column_b
  std::string column_b;
  std::string measure;   // "spearman" or "cramers_v"
  // Empty when the statistic is undefined on the noisy table (degenerate
  // marginal). The charge is debited either way.
  std::optional<NoisyValue> coefficient;
  double epsilon_charged = 0.0;

  bool defined() const { return coefficient.has_value(); }
};

struct BudgetBreakdown {
  std::size_t dist_queries = 0;
  std::size_t miss_queries = 0;
  std::size_t outl_queries = 0;
  std::size_t corr_queries = 0;
  double dist = 0.0;
  double miss = 0.0;
  double outl = 0.0;
  double corr = 0.0;
  double total = 0.0;

  std::size_t total_queries() const {
    return dist_queries + miss_queries + outl_queries + corr_queries;
  }
};

inline std::size_t choose2(std::size_t k) { return k < 2 ? 0 : k * (k - 1) / 2; }

// Privacy loss of the basic EDA with n numeric and c categorical columns:
//   DIST eps*(5n + c), MISS eps*n, OUTL eps*n, CORR eps*(C(n,2) + C(c,2)).
// Each figure is eps times an integer query count, rounded once, which is the
// same value the ledger reaches after that many equal charges.
inline BudgetBreakdown budget_closed_form(std::size_t n, std::size_t c, double eps_i) {
  BudgetBreakdown b;
  b.dist_queries = 5 * n + c;
  b.miss_queries = n;
  b.outl_queries = n;
  b.corr_queries = choose2(n) + choose2(c);
  b.dist = eps_i * static_cast<double>(b.dist_queries);
  b.miss = eps_i * static_cast<double>(b.miss_queries);
  b.outl = eps_i * static_cast<double>(b.outl_queries);
  b.corr = eps_i * static_cast<double>(b.corr_queries);
  b.total = eps_i * static_cast<double>(b.total_queries());
  return b;
}

// ---------------------------------------------------------------------------
// Private queries
// ---------------------------------------------------------------------------
namespace detail {

inline const ColumnSpec& require_kind(const Dataset& ds, std::string_view column, ColumnKind kind,
                                      std::string_view function) {
  const ColumnSpec& spec = ds.schema().column(ds.schema().index_of(column));
  if (spec.kind != kind) {
    throw KindError(std::string(function) + ": column '" + spec.name + "' is " +
                    std::string(to_string(spec.kind)) + ", expected " +
                    std::string(to_string(kind)));
  }
  return spec;
}

inline void require_epsilon(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ParamError("eps_i must be finite and > 0");
}

inline std::pair<std::string, std::string> canonical_pair(std::string_view a, std::string_view b) {
  if (a == b) throw ParamError("correlation needs two distinct columns");
  return a < b ? std::pair{std::string(a), std::string(b)}
               : std::pair{std::string(b), std::string(a)};
}

// Exponential-mechanism quantile over the intervals between consecutive
// clamped samples (plus the bounds); score -|i - pN|, sensitivity 1.
inline double exponential_quantile(const std::vector<double>& sorted, Bounds bounds, double p,
                                   double eps, Rng& rng) {
  std::vector<double> edges;
  edges.reserve(sorted.size() + 2);
  edges.push_back(bounds.lower);
  edges.insert(edges.end(), sorted.begin(), sorted.end());
  edges.push_back(bounds.upper);
  const double target = p * static_cast<double>(sorted.size());
  std::vector<double> log_w(edges.size() - 1);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double width = edges[i + 1] - edges[i];
    log_w[i] = width > 0.0 ? std::log(width) - eps * std::fabs(static_cast<double>(i) - target) / 2.0
                           : -std::numeric_limits<double>::infinity();
    best = std::max(best, log_w[i]);
  }
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - best);
  const std::size_t pick = sample_discrete(rng, w);
  return edges[pick] + uniform01(rng) * (edges[pick + 1] - edges[pick]);
}

}  // namespace detail

// DIST for a numeric column: min, max, Q1, Q2, Q3 on present values, each a
// separate sequential charge of eps_i with sensitivity U - L. The five charges
// are debited atomically before anything is computed.
inline DistNumericResult dist_numeric(const Dataset& ds, std::string_view column, double eps_i,
                                      Ledger& ledger, NoiseSource& noise,
                                      const EdaConfig& config = {}) {
  detail::require_epsilon(eps_i);
  const ColumnSpec& spec = detail::require_kind(ds, column, ColumnKind::kNumeric, "DIST");
  static constexpr const char* kStats[] = {"min", "max", "q1", "q2", "q3"};
  std::vector<ChargeRequest> charges;
  for (const char* s : kStats) {
    charges.push_back({eps_i, "DIST(" + spec.name + ")." + s, Composition::kSequential, 1});
  }
  ledger.require(charges);

  const auto sorted = stats::sorted_present(ds.numeric(column));
  if (sorted.empty()) throw EmptyColumn("DIST: column '" + spec.name + "' has no present values");

  const MechanismParams params(spec.bounds.width(), eps_i);
  auto release = [&](double p) {
    const double truth = stats::quantile(sorted, p);
    if (config.quantile_mode == QuantileMode::kLaplace || !noise.options().add_noise) {
      return noise.laplace(truth, params);
    }
    NoisyValue out{detail::exponential_quantile(sorted, spec.bounds, p, eps_i, noise.rng()),
                   MechanismParams(1.0, eps_i), std::nullopt};
    if (noise.options().test_mode) out.true_value = truth;
    return out;
  };
  DistNumericResult r;
  r.column = spec.name;
  r.min = release(0.0);
  r.max = release(1.0);
  r.q1 = release(0.25);
  r.q2 = release(0.5);
  r.q3 = release(0.75);
  return r;
}

// DIST for a categorical column: value counts over the domain plus a
// "(missing)" cell. Cells partition the records, so the whole histogram is a
// single parallel-group charge of eps_i.
inline HistogramResult dist_categorical(const Dataset& ds, std::string_view column, double eps_i,
                                        Ledger& ledger, NoiseSource& noise) {
  detail::require_epsilon(eps_i);
  const ColumnSpec& spec = detail::require_kind(ds, column, ColumnKind::kCategorical, "DIST");
  const std::size_t cells = spec.domain.size() + 1;
  ledger.require({parallel_group(std::vector<double>(cells, eps_i), "DIST(" + spec.name + ")")});

  std::vector<double> counts(cells, 0.0);
  for (const auto& v : ds.categorical(column)) counts[v ? *v : cells - 1] += 1.0;

  HistogramResult r;
  r.column = spec.name;
  r.labels = spec.domain;
  r.labels.emplace_back(kMissingLabel);
  r.epsilon_charged = eps_i;
  const MechanismParams params(1.0, eps_i);
  for (double c : counts) r.counts.push_back(noise.laplace(c, params));
  return r;
}

// MISS for a numeric column (categorical missingness is a histogram cell).
inline NoisyValue missing_count(const Dataset& ds, std::string_view column, double eps_i,
                                Ledger& ledger, NoiseSource& noise) {
  detail::require_epsilon(eps_i);
  const ColumnSpec& spec = detail::require_kind(ds, column, ColumnKind::kNumeric, "MISS");
  ledger.require({{eps_i, "MISS(" + spec.name + ")", Composition::kSequential, 1}});
  const auto idx = ds.schema().index_of(column);
  return noise.laplace(static_cast<double>(ds.missing_in(idx)), MechanismParams(1.0, eps_i));
}

// OUTL with caller-supplied cutoff quartiles. The quartiles must be values
// already released by DIST, so they carry no further privacy cost.
inline NoisyValue outlier_count(const Dataset& ds, std::string_view column, double eps_i,
                                Ledger& ledger, NoiseSource& noise, double q1, double q3) {
  detail::require_epsilon(eps_i);
  const ColumnSpec& spec = detail::require_kind(ds, column, ColumnKind::kNumeric, "OUTL");
  ledger.require({{eps_i, "OUTL(" + spec.name + ")", Composition::kSequential, 1}});
  const auto n = stats::count_outside(ds.numeric(column), q1, q3);
  return noise.laplace(static_cast<double>(n), MechanismParams(1.0, eps_i));
}

// Spearman's rho from a noisy B x B equal-width joint histogram. Rows with a
// missing value in either column are dropped. The histogram cells partition
// the records: one parallel-group charge of eps_i.
inline CorrelationResult spearman_dp(const Dataset& ds, std::string_view column_a,
                                     std::string_view column_b, double eps_i, Ledger& ledger,
                                     NoiseSource& noise, const EdaConfig& config = {}) {
  detail::require_epsilon(eps_i);
  auto [a, b] = detail::canonical_pair(column_a, column_b);
  const ColumnSpec& sa = detail::require_kind(ds, a, ColumnKind::kNumeric, "CORR");
  const ColumnSpec& sb = detail::require_kind(ds, b, ColumnKind::kNumeric, "CORR");
  if (config.spearman_bins < 2) throw ParamError("spearman_bins must be >= 2");
  const std::size_t bins = config.spearman_bins;
  ledger.require({parallel_group(std::vector<double>(bins * bins, eps_i),
                                 "CORR(" + a + "," + b + ")")});

  const auto truth_table = stats::binned_joint(ds.numeric(a), sa.bounds, ds.numeric(b), sb.bounds, bins);
  stats::Table noisy = truth_table;
  for (double& cell : noisy.cells) cell = std::max(0.0, noise.perturb(cell, 1.0 / eps_i));

  CorrelationResult r{a, b, "spearman", std::nullopt, eps_i};
  if (auto rho = stats::spearman_from_table(noisy)) {
    NoisyValue v{*rho, MechanismParams(1.0, eps_i), std::nullopt};
    if (noise.options().test_mode) {
      v.true_value = stats::spearman_from_table(truth_table).value_or(std::nan(""));
    }
    r.coefficient = v;
  }
  return r;
}

// Cramer's V from a noisy r x k contingency table of present values; one
// parallel-group charge of eps_i.
inline CorrelationResult cramers_v_dp(const Dataset& ds, std::string_view column_a,
                                      std::string_view column_b, double eps_i, Ledger& ledger,
                                      NoiseSource& noise) {
  detail::require_epsilon(eps_i);
  auto [a, b] = detail::canonical_pair(column_a, column_b);
  const ColumnSpec& sa = detail::require_kind(ds, a, ColumnKind::kCategorical, "CORR");
  const ColumnSpec& sb = detail::require_kind(ds, b, ColumnKind::kCategorical, "CORR");
  const std::size_t ra = sa.domain.size();
  const std::size_t kb = sb.domain.size();
  if (ra < 2 || kb < 2) {
    throw DegenerateColumn("CORR: Cramer's V needs at least two categories per column");
  }
  ledger.require({parallel_group(std::vector<double>(ra * kb, eps_i),
                                 "CORR(" + a + "," + b + ")")});

  const auto truth_table = stats::contingency(ds.categorical(a), ra, ds.categorical(b), kb);
  stats::Table noisy = truth_table;
  for (double& cell : noisy.cells) cell = std::max(0.0, noise.perturb(cell, 1.0 / eps_i));

  NoisyValue v{stats::cramers_v_from_table(noisy), MechanismParams(1.0, eps_i), std::nullopt};
  if (noise.options().test_mode) v.true_value = stats::cramers_v_from_table(truth_table);
  return {a, b, "cramers_v", v, eps_i};
}

// ---------------------------------------------------------------------------
// Sessions and the orchestrated basic EDA
// ---------------------------------------------------------------------------

struct ReleasedStatistic {
  std::string statistic;
  std::optional<NoisyValue> value;  // empty = undefined
};

// One query family applied to one column or column pair.
struct EdaEntry {
  std::string function;  // DIST, MISS, OUTL, CORR
  std::vector<std::string> columns;
  double epsilon_charged = 0.0;
  double sensitivity = 0.0;
  std::vector<ReleasedStatistic> values;
};

struct EdaReport {
  std::vector<EdaEntry> entries;

  const EdaEntry* find(std::string_view function, const std::vector<std::string>& columns) const {
    for (const auto& e : entries)
      if (e.function == function && e.columns == columns) return &e;
    return nullptr;
  }
};

inline EdaEntry to_entry(const DistNumericResult& r) {
  const double eps = r.min.params.epsilon();
  ExactSum total;
  for (int i = 0; i < 5; ++i) total.add(eps);
  return {"DIST", {r.column}, total.value(), r.min.params.sensitivity(),
          {{"min", r.min}, {"max", r.max}, {"q1", r.q1}, {"q2", r.q2}, {"q3", r.q3}}};
}

inline EdaEntry to_entry(const HistogramResult& r) {
  EdaEntry e{"DIST", {r.column}, r.epsilon_charged, 1.0, {}};
  for (std::size_t i = 0; i < r.counts.size(); ++i) e.values.push_back({r.labels[i], r.counts[i]});
  return e;
}

inline EdaEntry to_entry(const CorrelationResult& r) {
  return {"CORR", {r.column_a, r.column_b}, r.epsilon_charged, 1.0, {{r.measure, r.coefficient}}};
}

inline EdaEntry to_entry(std::string function, const std::string& column, const NoisyValue& v) {
  return {std::move(function), {column}, v.params.epsilon(), v.params.sensitivity(), {{"count", v}}};
}

// Interactive analysis over one dataset and one ledger. Remembers the
// quartiles DIST released per column so that OUTL can reuse them.
class EdaSession {
 public:
  EdaSession(const Dataset& ds, Ledger& ledger, NoiseSource& noise, EdaConfig config = {})
      : ds_(ds), ledger_(ledger), noise_(noise), config_(config) {}

  const Dataset& dataset() const { return ds_; }
  Ledger& ledger() { return ledger_; }

  DistNumericResult dist_numeric(std::string_view column, double eps_i) {
    auto r = dpeda::dist_numeric(ds_, column, eps_i, ledger_, noise_, config_);
    quartiles_[r.column] = {r.q1.value, r.q3.value};
    return r;
  }

  HistogramResult dist_categorical(std::string_view column, double eps_i) {
    return dpeda::dist_categorical(ds_, column, eps_i, ledger_, noise_);
  }

  NoisyValue missing_count(std::string_view column, double eps_i) {
    return dpeda::missing_count(ds_, column, eps_i, ledger_, noise_);
  }

  NoisyValue outlier_count(std::string_view column, double eps_i) {
    detail::require_kind(ds_, column, ColumnKind::kNumeric, "OUTL");
    auto it = quartiles_.find(std::string(column));
    if (it == quartiles_.end()) {
      throw MissingPrerequisite("DIST", "OUTL(" + std::string(column) +
                                            ") needs the quartiles released by DIST first");
    }
    return dpeda::outlier_count(ds_, column, eps_i, ledger_, noise_, it->second.first,
                                it->second.second);
  }

  CorrelationResult correlation(std::string_view a, std::string_view b, double eps_i) {
    const auto& schema = ds_.schema();
    const bool num_a = schema.column(schema.index_of(a)).is_numeric();
    const bool num_b = schema.column(schema.index_of(b)).is_numeric();
    if (num_a != num_b) {
      throw KindError("CORR: mixed numeric/categorical pairs are not supported");
    }
    return num_a ? spearman_dp(ds_, a, b, eps_i, ledger_, noise_, config_)
                 : cramers_v_dp(ds_, a, b, eps_i, ledger_, noise_);
  }

  bool has_quartiles(std::string_view column) const {
    return quartiles_.count(std::string(column)) != 0;
  }

 private:
  const Dataset& ds_;
  Ledger& ledger_;
  NoiseSource& noise_;
  EdaConfig config_;
  std::map<std::string, std::pair<double, double>> quartiles_;
};

// Runs every DIST, MISS, OUTL and CORR query of the basic EDA. Charge order:
// DIST numeric then categorical (schema order), MISS, OUTL, then CORR over
// numeric pairs and categorical pairs in lexicographic order. The full
// closed-form budget is checked before the first query.
inline EdaReport run_basic_eda(const Dataset& ds, double eps_i, Ledger& ledger,
                               NoiseSource& noise, const EdaConfig& config = {}) {
  detail::require_epsilon(eps_i);
  const Schema& schema = ds.schema();
  const auto closed = budget_closed_form(schema.numeric_count(), schema.categorical_count(), eps_i);
  if (closed.total_queries() > 0 && !ledger.can_absorb(closed.total)) {
    throw BudgetExhausted(closed.total, ledger.remaining());
  }

  EdaSession session(ds, ledger, noise, config);
  EdaReport report;
  std::vector<std::string> numeric, categorical;
  for (auto i : schema.numeric_indices()) numeric.push_back(schema.column(i).name);
  for (auto i : schema.categorical_indices()) categorical.push_back(schema.column(i).name);

  for (const auto& col : numeric) report.entries.push_back(to_entry(session.dist_numeric(col, eps_i)));
  for (const auto& col : categorical) {
    report.entries.push_back(to_entry(session.dist_categorical(col, eps_i)));
  }
  for (const auto& col : numeric) {
    report.entries.push_back(to_entry("MISS", col, session.missing_count(col, eps_i)));
  }
  for (const auto& col : numeric) {
    report.entries.push_back(to_entry("OUTL", col, session.outlier_count(col, eps_i)));
  }
  auto pairs = [](std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j) out.emplace_back(names[i], names[j]);
    return out;
  };
  for (const auto& [a, b] : pairs(numeric)) {
    report.entries.push_back(to_entry(spearman_dp(ds, a, b, eps_i, ledger, noise, config)));
  }
  for (const auto& [a, b] : pairs(categorical)) {
    report.entries.push_back(to_entry(cramers_v_dp(ds, a, b, eps_i, ledger, noise)));
  }
  return report;
}

// {function, columns, epsilon_charged, sensitivity, values: [{statistic,
// value[, true_value]}]}. Undefined values serialize as null.
inline nlohmann::json to_json(const EdaEntry& e) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : e.values) {
    nlohmann::json j{{"statistic", v.statistic}};
    if (v.value) {
      j["value"] = v.value->value;
      j["scale"] = v.value->params.scale();
      if (v.value->true_value) j["true_value"] = *v.value->true_value;
    } else {
      j["value"] = nullptr;
    }
    values.push_back(std::move(j));
  }
  return {{"function", e.function},
          {"columns", e.columns},
          {"epsilon_charged", e.epsilon_charged},
          {"sensitivity", e.sensitivity},
          {"values", std::move(values)}};
}

inline nlohmann::json to_json(const EdaReport& report) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : report.entries) out.push_back(to_json(e));
  return out;
}

}  // namespace dpeda
