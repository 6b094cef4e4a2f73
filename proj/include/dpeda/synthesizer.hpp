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
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpeda/core.hpp"
#include "dpeda/eda.hpp"
#include "dpeda/error.hpp"
#include "dpeda/mechanisms.hpp"
#include "dpeda/random.hpp"
#include "json.hpp"

namespace dpeda {

// Sensitivity assumed for mutual-information scores in the exponential
// mechanism: twice the largest change (ln 2, reached going from one record
// to two) seen by the exhaustive sensitivity oracle on domains up to 4 x 3
// with m <= 6 (see tests/synthesizer_test.cpp).
// TODO: switch to an m-dependent analytic bound, which shrinks like log(m)/m
// and would sharpen structure selection on large tables.
inline constexpr double kMutualInformationSensitivity = 2.0 * 0.6931471805599453;

struct SynthesizerConfig {
  std::size_t degree = 4;
  std::size_t bins = 20;
  // When false the structure is the plain MI argmax and is NOT private.
  bool private_structure = true;
  bool add_noise = true;
  double mi_sensitivity = kMutualInformationSensitivity;
  // Share of epsilon spent on structure learning; the rest estimates CPDs.
  double structure_share = 0.5;
};

// Discrete view of a dataset: numeric columns become equal-width bin indices
// over their bounds, categorical columns keep their codes, and missing is one
// extra symbol (the last) in every column.
struct DiscreteView {
  SchemaPtr schema;
  std::size_t bins = 0;
  std::size_t rows = 0;
  std::vector<std::size_t> cardinality;
  std::vector<std::vector<std::uint32_t>> codes;

  std::size_t variables() const { return codes.size(); }
  std::uint32_t missing_symbol(std::size_t var) const {
    return static_cast<std::uint32_t>(cardinality[var] - 1);
  }
};

inline DiscreteView discretize(const Dataset& ds, std::size_t bins_per_numeric) {
  if (bins_per_numeric < 2) throw ParamError("discretize: bins must be >= 2");
  DiscreteView view;
  view.schema = ds.schema_ptr();
  view.bins = bins_per_numeric;
  view.rows = ds.rows();
  const Schema& schema = ds.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const ColumnSpec& spec = schema.column(j);
    std::vector<std::uint32_t> codes(ds.rows());
    if (spec.is_numeric()) {
      const auto missing = static_cast<std::uint32_t>(bins_per_numeric);
      const auto& col = ds.numeric(j);
      for (std::size_t r = 0; r < col.size(); ++r) {
        codes[r] = col[r] ? static_cast<std::uint32_t>(stats::bin_of(*col[r], spec.bounds, bins_per_numeric))
                          : missing;
      }
      view.cardinality.push_back(bins_per_numeric + 1);
    } else {
      const auto missing = static_cast<std::uint32_t>(spec.domain.size());
      const auto& col = ds.categorical(j);
      for (std::size_t r = 0; r < col.size(); ++r) codes[r] = col[r] ? *col[r] : missing;
      view.cardinality.push_back(spec.domain.size() + 1);
    }
    view.codes.push_back(std::move(codes));
  }
  return view;
}

struct NetworkNode {
  std::size_t variable = 0;
  std::vector<std::size_t> parents;
};

// Nodes are listed in construction order; every parent appears earlier than
// its child, so the graph is acyclic by construction.
struct BayesianNetwork {
  std::size_t degree = 0;
  std::vector<NetworkNode> nodes;
  bool structure_private = true;
  double epsilon_structure = 0.0;
};

namespace detail {

inline std::uint64_t config_space(const DiscreteView& view, const std::vector<std::size_t>& vars) {
  std::uint64_t size = 1;
  for (auto v : vars) {
    if (size > (std::uint64_t{1} << 40) / view.cardinality[v]) {
      throw ParamError("parent configuration space too large");
    }
    size *= view.cardinality[v];
  }
  return size;
}

inline std::uint64_t config_of(const DiscreteView& view, const std::vector<std::size_t>& vars,
                               std::size_t row) {
  std::uint64_t code = 0;
  for (auto v : vars) code = code * view.cardinality[v] + view.codes[v][row];
  return code;
}

template <typename Fn>
void for_each_combination(const std::vector<std::size_t>& pool, std::size_t r, Fn&& fn) {
  std::vector<std::size_t> idx(r);
  for (std::size_t i = 0; i < r; ++i) idx[i] = i;
  std::vector<std::size_t> pick(r);
  for (;;) {
    for (std::size_t i = 0; i < r; ++i) pick[i] = pool[idx[i]];
    fn(pick);
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == pool.size() - r + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

// Empirical mutual information I(child; parents) in nats.
inline double mutual_information(const DiscreteView& view, std::size_t child,
                                 const std::vector<std::size_t>& parents) {
  if (view.rows == 0 || parents.empty()) return 0.0;
  detail::config_space(view, parents);
  const std::size_t kc = view.cardinality[child];
  std::unordered_map<std::uint64_t, double> joint;
  std::unordered_map<std::uint64_t, double> parent_counts;
  std::vector<double> child_counts(kc, 0.0);
  for (std::size_t r = 0; r < view.rows; ++r) {
    const std::uint64_t pa = detail::config_of(view, parents, r);
    const std::uint32_t x = view.codes[child][r];
    joint[pa * kc + x] += 1.0;
    parent_counts[pa] += 1.0;
    child_counts[x] += 1.0;
  }
  const double m = static_cast<double>(view.rows);
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pc = parent_counts[key / kc];
    const double xc = child_counts[key % kc];
    mi += (c / m) * std::log(c * m / (pc * xc));
  }
  return std::max(0.0, mi);
}

// Greedy degree-k network construction. The first variable is uniform; each
// later step picks a (new variable, parent set) pair, where parent sets have
// size min(k, |placed|), through the exponential mechanism on MI scores with
// eps1 / (d - 1) per step.
inline BayesianNetwork learn_structure(const DiscreteView& view, std::size_t k, double eps1,
                                       Rng& rng, const SynthesizerConfig& config = {}) {
  if (k < 1) throw ParamError("learn_structure: degree must be >= 1");
  const std::size_t d = view.variables();
  if (d == 0) throw ParamError("learn_structure: no variables");
  if (config.private_structure && d > 1 && !(eps1 > 0.0)) {
    throw ParamError("learn_structure: structure epsilon must be > 0");
  }

  BayesianNetwork net;
  net.degree = k;
  net.structure_private = config.private_structure;
  net.epsilon_structure = config.private_structure ? eps1 : 0.0;

  std::vector<bool> placed(d, false);
  std::vector<std::size_t> order;
  const std::size_t first = static_cast<std::size_t>(uniform_index(rng, d));
  placed[first] = true;
  order.push_back(first);
  net.nodes.push_back({first, {}});

  const double eps_step = d > 1 ? eps1 / static_cast<double>(d - 1) : 0.0;
  while (order.size() < d) {
    std::vector<NetworkNode> candidates;
    std::vector<double> scores;
    std::vector<std::size_t> pool = order;
    std::sort(pool.begin(), pool.end());
    const std::size_t r = std::min(k, pool.size());
    for (std::size_t x = 0; x < d; ++x) {
      if (placed[x]) continue;
      detail::for_each_combination(pool, r, [&](const std::vector<std::size_t>& parents) {
        candidates.push_back({x, parents});
        scores.push_back(mutual_information(view, x, parents));
      });
    }
    std::size_t pick = 0;
    if (config.private_structure) {
      pick = exponential_mechanism(scores, config.mi_sensitivity, eps_step, rng);
    } else {
      pick = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    }
    placed[candidates[pick].variable] = true;
    order.push_back(candidates[pick].variable);
    net.nodes.push_back(std::move(candidates[pick]));
  }
  return net;
}

// Conditional distribution of one variable given its parents. Row `c` of
// `probs` holds P(variable | parent configuration c), configurations encoded
// in mixed radix over `parents` in order.
struct Cpd {
  std::size_t variable = 0;
  std::vector<std::size_t> parents;
  std::size_t cardinality = 0;
  std::uint64_t configs = 1;
  std::vector<double> probs;

  std::span<const double> row(std::uint64_t config) const {
    return {probs.data() + config * cardinality, cardinality};
  }
};

// Noisy CPDs: for each of the d variables the joint count table of
// (parents, variable) gets Laplace(d / eps2) per cell (one table is a
// partition of the records, the d tables compose sequentially to eps2).
// Negative cells are clamped to 0 and each row normalized; all-zero rows
// become uniform.
inline std::vector<Cpd> estimate_cpds(const DiscreteView& view, const BayesianNetwork& network,
                                      double eps2, Rng& rng, bool add_noise = true) {
  const std::size_t d = view.variables();
  if (add_noise && !(eps2 > 0.0)) throw ParamError("estimate_cpds: epsilon must be > 0");
  const double scale = add_noise ? static_cast<double>(d) / eps2 : 0.0;
  std::vector<Cpd> cpds;
  cpds.reserve(network.nodes.size());
  for (const auto& node : network.nodes) {
    Cpd cpd;
    cpd.variable = node.variable;
    cpd.parents = node.parents;
    cpd.cardinality = view.cardinality[node.variable];
    cpd.configs = detail::config_space(view, node.parents);
    cpd.probs.assign(cpd.configs * cpd.cardinality, 0.0);
    for (std::size_t r = 0; r < view.rows; ++r) {
      const std::uint64_t c = detail::config_of(view, node.parents, r);
      cpd.probs[c * cpd.cardinality + view.codes[node.variable][r]] += 1.0;
    }
    for (double& cell : cpd.probs) {
      if (scale > 0.0) cell += sample_laplace(scale, rng);
      cell = std::max(0.0, cell);
    }
    for (std::uint64_t c = 0; c < cpd.configs; ++c) {
      double* row = cpd.probs.data() + c * cpd.cardinality;
      double total = 0.0;
      for (std::size_t x = 0; x < cpd.cardinality; ++x) total += row[x];
      for (std::size_t x = 0; x < cpd.cardinality; ++x) {
        row[x] = total > 0.0 ? row[x] / total : 1.0 / static_cast<double>(cpd.cardinality);
      }
    }
    cpds.push_back(std::move(cpd));
  }
  return cpds;
}

// Ancestral sampling in network order. Numeric bins are materialized as a
// uniform draw inside the bin; the missing symbol becomes a missing cell.
// `cpds` must be in network order.
inline Dataset sample_rows(const BayesianNetwork& network, const std::vector<Cpd>& cpds,
                           std::size_t m, Rng& rng, const SchemaPtr& schema, std::size_t bins) {
  const std::size_t d = schema->size();
  if (network.nodes.size() != d || cpds.size() != d) {
    throw ParamError("sample_rows: network does not cover the schema");
  }
  std::vector<std::vector<std::uint32_t>> codes(d, std::vector<std::uint32_t>(m));
  std::vector<double> weights;
  for (std::size_t r = 0; r < m; ++r) {
    for (const auto& cpd : cpds) {
      std::uint64_t config = 0;
      for (std::size_t i = 0; i < cpd.parents.size(); ++i) {
        const auto p = cpd.parents[i];
        const ColumnSpec& ps = schema->column(p);
        const std::uint64_t card = ps.is_numeric() ? bins + 1 : ps.domain.size() + 1;
        config = config * card + codes[p][r];
      }
      const auto row = cpd.row(config);
      weights.assign(row.begin(), row.end());
      codes[cpd.variable][r] = static_cast<std::uint32_t>(sample_discrete(rng, weights));
    }
  }

  std::vector<ColumnData> columns;
  for (std::size_t j = 0; j < d; ++j) {
    const ColumnSpec& spec = schema->column(j);
    if (spec.is_numeric()) {
      NumericColumn col(m);
      const double width = spec.bounds.width() / static_cast<double>(bins);
      for (std::size_t r = 0; r < m; ++r) {
        const auto b = codes[j][r];
        if (b >= bins) continue;
        const double v = spec.bounds.lower + (static_cast<double>(b) + uniform01(rng)) * width;
        col[r] = clamp_numeric(v, spec.bounds);
      }
      columns.emplace_back(std::move(col));
    } else {
      CategoricalColumn col(m);
      for (std::size_t r = 0; r < m; ++r) {
        if (codes[j][r] < spec.domain.size()) col[r] = codes[j][r];
      }
      columns.emplace_back(std::move(col));
    }
  }
  return Dataset(schema, std::move(columns));
}

struct SynthesisProvenance {
  double epsilon = 0.0;
  double epsilon_structure = 0.0;
  double epsilon_parameters = 0.0;
  std::size_t degree = 0;
  std::size_t bins = 0;
  std::size_t rows = 0;
  bool structure_private = true;
  bool noise = true;

  // Privacy actually claimed: structure (when private) plus parameters.
  double epsilon_total() const { return epsilon_structure + epsilon_parameters; }
};

struct SynthesisResult {
  Dataset data;
  BayesianNetwork network;
  SynthesisProvenance provenance;
};

// discretize -> learn_structure -> estimate_cpds -> sample_rows, with the
// budget split between structure and parameters per `config.structure_share`.
inline SynthesisResult synthesize(const Dataset& ds, double epsilon, std::size_t k, Rng& rng,
                                  const SynthesizerConfig& config = {}) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ParamError("synthesize: epsilon must be finite and > 0");
  }
  if (!(config.structure_share > 0.0 && config.structure_share < 1.0)) {
    throw ParamError("synthesize: structure_share must lie in (0, 1)");
  }
  const DiscreteView view = discretize(ds, config.bins);
  const double eps1 = epsilon * config.structure_share;
  const double eps2 = epsilon - eps1;
  BayesianNetwork network = learn_structure(view, k, eps1, rng, config);
  const auto cpds = estimate_cpds(view, network, eps2, rng, config.add_noise);
  Dataset data = sample_rows(network, cpds, ds.rows(), rng, ds.schema_ptr(), config.bins);

  SynthesisProvenance prov;
  prov.epsilon = epsilon;
  prov.epsilon_structure = config.private_structure ? eps1 : 0.0;
  prov.epsilon_parameters = eps2;
  prov.degree = k;
  prov.bins = config.bins;
  prov.rows = ds.rows();
  prov.structure_private = config.private_structure;
  prov.noise = config.add_noise;
  return {std::move(data), std::move(network), prov};
}

inline nlohmann::json to_json(const SynthesisProvenance& p, const BayesianNetwork& net,
                              const Schema& schema) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : net.nodes) {
    std::vector<std::string> parents;
    for (auto p_idx : n.parents) parents.push_back(schema.column(p_idx).name);
    nodes.push_back({{"variable", schema.column(n.variable).name}, {"parents", parents}});
  }
  return {{"epsilon", p.epsilon},
          {"epsilon_structure", p.epsilon_structure},
          {"epsilon_parameters", p.epsilon_parameters},
          {"degree", p.degree},
          {"bins", p.bins},
          {"rows", p.rows},
          {"structure_private", p.structure_private},
          {"noise", p.noise},
          {"network", std::move(nodes)}};
}

// Total-variation distance between the one-way marginals of a column in two
// datasets over the same schema (numeric columns binned, missing a symbol).
inline double marginal_tvd(const Dataset& a, const Dataset& b, std::size_t column,
                           std::size_t bins) {
  auto marginal = [&](const Dataset& ds) {
    const DiscreteView v = discretize(ds, bins);
    std::vector<double> p(v.cardinality[column], 0.0);
    for (auto code : v.codes[column]) p[code] += 1.0;
    if (v.rows > 0)
      for (double& x : p) x /= static_cast<double>(v.rows);
    return p;
  };
  const auto pa = marginal(a);
  const auto pb = marginal(b);
  double l1 = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) l1 += std::fabs(pa[i] - pb[i]);
  return l1 / 2.0;
}

}  // namespace dpeda
