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

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dpeda/core.hpp"
#include "dpeda/random.hpp"

namespace dpeda {

// Shape of a generated tabular fixture: correlated numeric columns with a
// small share of far outliers, and skewed categorical columns whose category
// depends on the same latent factor.
struct DeskSpec {
  std::string name = "desk";
  std::size_t rows = 5000;
  std::size_t numeric = 3;
  std::size_t categorical = 3;
  std::uint64_t seed = 7;
  double outlier_rate = 0.02;
};

inline std::size_t desk_domain_size(std::size_t j) {
  static constexpr std::size_t kSizes[] = {3, 5, 2, 4, 7, 3, 6, 2, 9};
  return kSizes[j % (sizeof(kSizes) / sizeof(kSizes[0]))];
}

inline SchemaPtr desk_schema(const DeskSpec& spec) {
  std::vector<ColumnSpec> cols;
  for (std::size_t j = 0; j < spec.numeric; ++j) {
    const double upper = 100.0 * static_cast<double>(j + 1);
    cols.push_back(ColumnSpec::numeric("num" + std::to_string(j), 0.0, upper, {"?"}));
  }
  for (std::size_t j = 0; j < spec.categorical; ++j) {
    std::vector<std::string> domain;
    for (std::size_t k = 0; k < desk_domain_size(j); ++k) {
      domain.push_back(std::string(1, static_cast<char>('a' + k)));
    }
    cols.push_back(ColumnSpec::categorical("cat" + std::to_string(j), std::move(domain), {"?"}));
  }
  return std::make_shared<const Schema>(std::move(cols), spec.name);
}

namespace detail {
inline double standard_normal(Rng& rng) {
  // Box-Muller; the second variate is discarded to keep the stream simple.
  const double u1 = uniform_open01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}
}  // namespace detail

inline Dataset make_desk_dataset(const DeskSpec& spec) {
  SchemaPtr schema = desk_schema(spec);
  Rng rng(spec.seed);
  std::vector<ColumnData> columns;
  std::vector<NumericColumn> numeric(spec.numeric, NumericColumn(spec.rows));
  std::vector<CategoricalColumn> categorical(spec.categorical, CategoricalColumn(spec.rows));
  for (std::size_t r = 0; r < spec.rows; ++r) {
    const double z = detail::standard_normal(rng);
    for (std::size_t j = 0; j < spec.numeric; ++j) {
      const Bounds b = schema->column(j).bounds;
      const double loading = (j % 2 == 0 ? 0.8 : -0.6);
      double t = 0.35 + 0.1 * (loading * z + 0.6 * detail::standard_normal(rng));
      if (uniform01(rng) < spec.outlier_rate) t = 0.85 + 0.15 * uniform01(rng);
      numeric[j][r] = clamp_numeric(b.lower + t * b.width(), b);
    }
    for (std::size_t j = 0; j < spec.categorical; ++j) {
      const std::size_t k = desk_domain_size(j);
      const double s = 0.7 * z + 0.7 * detail::standard_normal(rng);
      const double u = 1.0 / (1.0 + std::exp(-s));
      // Squaring skews mass toward the first categories.
      auto code = static_cast<std::uint32_t>(std::floor(u * u * static_cast<double>(k)));
      categorical[j][r] = std::min<std::uint32_t>(code, static_cast<std::uint32_t>(k - 1));
    }
  }
  for (auto& c : numeric) columns.emplace_back(std::move(c));
  for (auto& c : categorical) columns.emplace_back(std::move(c));
  return Dataset(schema, std::move(columns));
}

}  // namespace dpeda
