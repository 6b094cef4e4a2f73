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

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dpeda/desk_data.hpp"
#include "dpeda/sensitivity_oracle.hpp"
#include "dpeda/synthesizer.hpp"
#include "gtest/gtest.h"

namespace dpeda {
namespace {

SchemaPtr TwoCategorical() {
  return std::make_shared<const Schema>(std::vector<ColumnSpec>{
      ColumnSpec::categorical("a", {"x", "y"}), ColumnSpec::categorical("b", {"p", "q"})});
}

// ---- discretize ------------------------------------------------------------

TEST(Discretize, BoundaryConventions) {
  auto schema = std::make_shared<const Schema>(
      std::vector<ColumnSpec>{ColumnSpec::numeric("v", 0, 100)});
  const Dataset ds(schema, {NumericColumn{0.0, 100.0, 50.0, std::nullopt, 4.999}});
  const DiscreteView v = discretize(ds, 20);
  EXPECT_EQ(v.cardinality[0], 21u);
  EXPECT_EQ(v.codes[0][0], 0u);
  EXPECT_EQ(v.codes[0][1], 19u);
  EXPECT_EQ(v.codes[0][2], 10u);
  EXPECT_EQ(v.codes[0][3], 20u);
  EXPECT_EQ(v.codes[0][4], 0u);
  EXPECT_THROW(discretize(ds, 1), ParamError);
}

TEST(Discretize, CategoricalKeepsCodesAndMissingIsLast) {
  const Dataset ds(TwoCategorical(), {CategoricalColumn{0, 1, std::nullopt},
                                      CategoricalColumn{1, std::nullopt, 0}});
  const DiscreteView v = discretize(ds, 20);
  EXPECT_EQ(v.codes[0], (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(v.codes[1], (std::vector<std::uint32_t>{1, 2, 0}));
  EXPECT_EQ(v.missing_symbol(1), 2u);
}

TEST(Discretize, BinMidpointsWithinOneWidth) {
  const Dataset ds = make_desk_dataset({"d", 2000, 3, 0, 17, 0.05});
  for (std::size_t bins : {2u, 7u, 20u}) {
    const DiscreteView v = discretize(ds, bins);
    for (std::size_t j = 0; j < 3; ++j) {
      const Bounds b = ds.schema().column(j).bounds;
      const double w = b.width() / static_cast<double>(bins);
      const auto& col = ds.numeric(j);
      for (std::size_t r = 0; r < col.size(); ++r) {
        if (!col[r]) continue;
        const double mid = b.lower + (v.codes[j][r] + 0.5) * w;
        EXPECT_LE(std::fabs(mid - *col[r]), w);
      }
    }
  }
}

// ---- mutual information and its sensitivity --------------------------------

TEST(MutualInformation, KnownValues) {
  const Dataset same(TwoCategorical(), {CategoricalColumn{0, 1, 0, 1}, CategoricalColumn{0, 1, 0, 1}});
  EXPECT_NEAR(mutual_information(discretize(same, 2), 1, {0}), std::log(2.0), 1e-12);
  const Dataset indep(TwoCategorical(), {CategoricalColumn{0, 0, 1, 1}, CategoricalColumn{0, 1, 0, 1}});
  EXPECT_NEAR(mutual_information(discretize(indep, 2), 1, {0}), 0.0, 1e-12);
  EXPECT_EQ(mutual_information(discretize(indep, 2), 1, {}), 0.0);
}

TEST(MutualInformation, FrozenSensitivityCoversOracle) {
  using Rec = std::pair<std::uint32_t, std::uint32_t>;
  double observed = 0.0;
  for (std::uint32_t ka : {2u, 3u, 4u}) {
    for (std::uint32_t kb : {2u, 3u}) {
      std::vector<Rec> universe;
      for (std::uint32_t a = 0; a < ka; ++a)
        for (std::uint32_t b = 0; b < kb; ++b) universe.push_back({a, b});
      auto query = [&](std::span<const Rec> d) -> std::optional<double> {
        if (d.empty()) return std::nullopt;
        DiscreteView v;
        v.rows = d.size();
        v.cardinality = {ka, kb};
        v.codes.assign(2, std::vector<std::uint32_t>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) {
          v.codes[0][i] = d[i].first;
          v.codes[1][i] = d[i].second;
        }
        return mutual_information(v, 1, {0});
      };
      observed = std::max(observed, max_sensitivity_oracle(query, std::span<const Rec>(universe), 6));
    }
  }
  EXPECT_NEAR(observed, std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(kMutualInformationSensitivity, 2.0 * observed);
}

// ---- learn_structure --------------------------------------------------------

TEST(LearnStructure, SingleVariable) {
  auto schema = std::make_shared<const Schema>(std::vector<ColumnSpec>{ColumnSpec::numeric("v", 0, 1)});
  const Dataset ds(schema, {NumericColumn{0.2, 0.7}});
  Rng rng(1);
  const auto net = learn_structure(discretize(ds, 4), 4, 0.5, rng);
  ASSERT_EQ(net.nodes.size(), 1u);
  EXPECT_TRUE(net.nodes[0].parents.empty());
  EXPECT_THROW(learn_structure(discretize(ds, 4), 0, 0.5, rng), ParamError);
}

TEST(LearnStructure, CorrelatedPairBecomesParentChild) {
  auto schema = std::make_shared<const Schema>(std::vector<ColumnSpec>{
      ColumnSpec::categorical("u", {"0", "1", "2"}), ColumnSpec::categorical("v", {"0", "1", "2"}),
      ColumnSpec::categorical("w", {"0", "1"})});
  CategoricalColumn u, v, w;
  Rng data(3);
  for (int r = 0; r < 600; ++r) {
    const auto x = static_cast<std::uint32_t>(uniform_index(data, 3));
    u.push_back(x);
    v.push_back(x);
    w.push_back(static_cast<std::uint32_t>(uniform_index(data, 2)));
  }
  const DiscreteView view = discretize(Dataset(schema, {u, v, w}), 20);
  SynthesizerConfig cfg;
  cfg.private_structure = false;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed);
    const auto net = learn_structure(view, 1, 0.0, rng, cfg);
    EXPECT_FALSE(net.structure_private);
    bool linked = false;
    for (const auto& n : net.nodes) {
      if (n.variable == 0 && n.parents == std::vector<std::size_t>{1}) linked = true;
      if (n.variable == 1 && n.parents == std::vector<std::size_t>{0}) linked = true;
    }
    EXPECT_TRUE(linked) << "seed " << seed;
  }
}

TEST(LearnStructure, DegreeBoundAndAcyclicity) {
  const Dataset ds = make_desk_dataset({"d", 300, 5, 5, 2, 0.02});
  const DiscreteView view = discretize(ds, 5);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const auto net = learn_structure(view, 4, 1.0, rng);
    ASSERT_EQ(net.nodes.size(), 10u);
    std::vector<bool> seen(10, false);
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
      const auto& n = net.nodes[i];
      EXPECT_EQ(n.parents.size(), std::min<std::size_t>(4, i));
      for (auto p : n.parents) EXPECT_TRUE(seen[p]);
      EXPECT_FALSE(seen[n.variable]);
      seen[n.variable] = true;
    }
  }
}

// ---- estimate_cpds ----------------------------------------------------------

BayesianNetwork AThenB() {
  BayesianNetwork net;
  net.degree = 1;
  net.nodes = {{0, {}}, {1, {0}}};
  return net;
}

TEST(EstimateCpds, NoiseOffEqualsEmpiricalConditionals) {
  // (x,p) (x,p) (x,q) (y,q) (y,q) (y,p)
  const Dataset ds(TwoCategorical(),
                   {CategoricalColumn{0, 0, 0, 1, 1, 1}, CategoricalColumn{0, 0, 1, 1, 1, 0}});
  Rng rng(1);
  const auto cpds = estimate_cpds(discretize(ds, 2), AThenB(), 1.0, rng, false);
  ASSERT_EQ(cpds.size(), 2u);
  const auto root = cpds[0].row(0);
  EXPECT_DOUBLE_EQ(root[0], 0.5);
  EXPECT_DOUBLE_EQ(root[1], 0.5);
  EXPECT_DOUBLE_EQ(root[2], 0.0);
  const auto bx = cpds[1].row(0), by = cpds[1].row(1), bmiss = cpds[1].row(2);
  EXPECT_DOUBLE_EQ(bx[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(bx[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(by[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(by[1], 2.0 / 3.0);
  // Parent value "missing" never occurs: its all-zero row becomes uniform.
  for (double p : bmiss) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(EstimateCpds, NoisyRowsAreDistributions) {
  const Dataset ds = make_desk_dataset({"d", 200, 2, 2, 4, 0.0});
  const DiscreteView view = discretize(ds, 6);
  Rng rng(8);
  const auto net = learn_structure(view, 2, 0.2, rng);
  for (double eps : {0.01, 1.0}) {
    const auto cpds = estimate_cpds(view, net, eps, rng);
    for (const auto& cpd : cpds) {
      for (std::uint64_t c = 0; c < cpd.configs; ++c) {
        double s = 0.0;
        for (double p : cpd.row(c)) {
          EXPECT_GE(p, 0.0);
          s += p;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

// ---- sample_rows ------------------------------------------------------------

std::vector<Cpd> HandCpds(std::vector<double> root, std::vector<double> child) {
  Cpd a{0, {}, 3, 1, std::move(root)};
  Cpd b{1, {0}, 3, 3, std::move(child)};
  return {a, b};
}

TEST(SampleRows, EmptyAndDeterministic) {
  Rng rng(1);
  const auto cpds = HandCpds({0, 1, 0}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(sample_rows(AThenB(), cpds, 0, rng, TwoCategorical(), 2).rows(), 0u);
  const Dataset ds = sample_rows(AThenB(), cpds, 50, rng, TwoCategorical(), 2);
  for (std::size_t r = 0; r < 50; ++r) {
    EXPECT_EQ(ds.categorical(0)[r], 1u);
    EXPECT_EQ(ds.categorical(1)[r], 1u);
  }
}

TEST(SampleRows, EmpiricalJointCloseToModel) {
  const std::vector<double> root = {0.6, 0.3, 0.1};
  const std::vector<double> child = {0.8, 0.15, 0.05, 0.2, 0.7, 0.1, 0.5, 0.0, 0.5};
  Rng rng(77);
  const std::size_t m = 10000;
  const Dataset ds = sample_rows(AThenB(), HandCpds(root, child), m, rng, TwoCategorical(), 2);
  double counts[3][3] = {};
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t a = ds.categorical(0)[r] ? *ds.categorical(0)[r] : 2;
    const std::size_t b = ds.categorical(1)[r] ? *ds.categorical(1)[r] : 2;
    counts[a][b] += 1.0;
  }
  double tvd = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) tvd += std::fabs(counts[a][b] / m - root[a] * child[a * 3 + b]);
  EXPECT_LT(tvd / 2.0, 0.05);
}

TEST(SampleRows, NumericDrawsStayInsideBin) {
  auto schema = std::make_shared<const Schema>(std::vector<ColumnSpec>{ColumnSpec::numeric("v", 10, 20)});
  BayesianNetwork net;
  net.nodes = {{0, {}}};
  Cpd cpd{0, {}, 6, 1, {0, 0, 1, 0, 0, 0}};
  Rng rng(2);
  const Dataset ds = sample_rows(net, {cpd}, 500, rng, schema, 5);
  for (const auto& v : ds.numeric(0)) {
    ASSERT_TRUE(v.has_value());
    EXPECT_GE(*v, 14.0);
    EXPECT_LE(*v, 16.0);
  }
}

// ---- synthesize -------------------------------------------------------------

TEST(Synthesize, ProvenanceSplitAtMatchedBudget) {
  const Dataset ds = make_desk_dataset({"adult", 300, 6, 9, 3, 0.02});
  Rng rng(5);
  const auto result = synthesize(ds, 0.51, 4, rng);
  EXPECT_EQ(result.provenance.epsilon_structure, 0.255);
  EXPECT_EQ(result.provenance.epsilon_parameters, 0.255);
  EXPECT_EQ(result.provenance.epsilon_total(), 0.51);
  EXPECT_EQ(result.data.rows(), 300u);
  for (const auto& n : result.network.nodes) EXPECT_LE(n.parents.size(), 4u);
  const auto j = to_json(result.provenance, result.network, ds.schema());
  EXPECT_EQ(j["network"].size(), 15u);
  EXPECT_DOUBLE_EQ(j["epsilon_structure"].get<double>(), 0.255);
}

TEST(Synthesize, OutputConformsToSchemaAndPreservesMissingness) {
  const Dataset base = make_desk_dataset({"d", 3000, 3, 3, 6, 0.02});
  const Dataset ds = inject_missing(base, "num0", 0.3, 1);
  Rng rng(6);
  const auto result = synthesize(ds, 5.0, 2, rng);
  // Dataset's constructor validates bounds and domains; reaching here means conformance.
  EXPECT_EQ(&result.data.schema(), &ds.schema());
  const double rate = static_cast<double>(result.data.missing_in(0)) / 3000.0;
  EXPECT_NEAR(rate, 0.3, 0.05);
}

TEST(Synthesize, Errors) {
  const Dataset ds = make_desk_dataset({"d", 20, 1, 1, 6, 0.0});
  Rng rng(1);
  EXPECT_THROW(synthesize(ds, 0.0, 4, rng), ParamError);
  EXPECT_THROW(synthesize(ds, 1.0, 0, rng), ParamError);
  SynthesizerConfig cfg;
  cfg.structure_share = 1.0;
  EXPECT_THROW(synthesize(ds, 1.0, 4, rng, cfg), ParamError);
}

TEST(Synthesize, DeterministicForSeed) {
  const Dataset ds = make_desk_dataset({"d", 200, 2, 2, 6, 0.0});
  Rng a(42), b(42);
  const auto ra = synthesize(ds, 1.0, 2, a);
  const auto rb = synthesize(ds, 1.0, 2, b);
  for (std::size_t r = 0; r < 200; ++r) {
    EXPECT_EQ(ra.data.numeric(0)[r], rb.data.numeric(0)[r]);
    EXPECT_EQ(ra.data.categorical(2)[r], rb.data.categorical(2)[r]);
  }
}

TEST(Synthesize, FidelityImprovesWithEpsilon) {
  const Dataset ds = make_desk_dataset({"d", 1000, 2, 2, 9, 0.02});
  int better = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng lo(seed), hi(seed + 100);
    const auto weak = synthesize(ds, 0.1, 2, lo);
    const auto strong = synthesize(ds, 10.0, 2, hi);
    for (std::size_t j = 0; j < 4; ++j) {
      better += marginal_tvd(ds, strong.data, j, 20) <= marginal_tvd(ds, weak.data, j, 20);
      ++total;
    }
  }
  EXPECT_GE(better, total * 8 / 10);
}

TEST(MarginalTvd, IdenticalAndDisjoint) {
  const Dataset a(TwoCategorical(), {CategoricalColumn{0, 0}, CategoricalColumn{0, 1}});
  const Dataset b(TwoCategorical(), {CategoricalColumn{1, 1}, CategoricalColumn{1, 0}});
  EXPECT_EQ(marginal_tvd(a, a, 0, 2), 0.0);
  EXPECT_EQ(marginal_tvd(a, b, 0, 2), 1.0);
  EXPECT_EQ(marginal_tvd(a, b, 1, 2), 0.0);
}

}  // namespace
}  // namespace dpeda
