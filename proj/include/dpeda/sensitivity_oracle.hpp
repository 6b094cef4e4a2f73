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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpeda/error.hpp"

namespace dpeda {

// Exhaustive sensitivity oracle: the maximum of |f(D) - f(D')| over every
// multiset D of at most `max_m` records drawn from `universe` and every D'
// obtained by adding one more record. Since add/remove neighbouring is
// symmetric this covers removal as well. Queries return std::nullopt where the
// statistic is undefined (e.g. a quantile of an empty column); such pairs are
// skipped.
//
// Query: callable std::span<const Record> -> std::optional<double>.
template <typename Record, typename Query>
double max_sensitivity_oracle(Query&& query, std::span<const Record> universe,
                              std::size_t max_m,
                              std::uint64_t enumeration_budget = 5'000'000) {
  const std::size_t u = universe.size();
  if (u == 0) throw ParamError("sensitivity oracle: empty universe");

  // Count of multisets of size <= max_m, times (u + 1) evaluations each.
  double multisets = 0.0;
  double layer = 1.0;  // C(u + k - 1, k)
  for (std::size_t k = 0; k <= max_m; ++k) {
    if (k > 0) layer = layer * static_cast<double>(u + k - 1) / static_cast<double>(k);
    multisets += layer;
  }
  if (multisets * static_cast<double>(u + 1) > static_cast<double>(enumeration_budget)) {
    throw TooLarge("sensitivity oracle: enumeration of " + std::to_string(multisets) +
                   " datasets exceeds the budget");
  }

  double worst = 0.0;
  std::vector<std::size_t> picks;  // non-decreasing indices into universe
  std::vector<Record> records;
  std::vector<Record> neighbour;

  auto visit = [&] {
    records.clear();
    for (std::size_t i : picks) records.push_back(universe[i]);
    const std::optional<double> base = query(std::span<const Record>(records));
    if (!base) return;
    for (std::size_t add = 0; add < u; ++add) {
      neighbour = records;
      neighbour.push_back(universe[add]);
      const std::optional<double> other = query(std::span<const Record>(neighbour));
      if (!other) continue;
      worst = std::max(worst, std::fabs(*base - *other));
    }
  };

  // Enumerate multisets in lexicographic order of their sorted index lists.
  for (std::size_t size = 0; size <= max_m; ++size) {
    picks.assign(size, 0);
    for (;;) {
      visit();
      std::size_t pos = size;
      while (pos > 0 && picks[pos - 1] == u - 1) --pos;
      if (pos == 0) break;
      const std::size_t next = picks[pos - 1] + 1;
      for (std::size_t k = pos - 1; k < size; ++k) picks[k] = next;
    }
  }
  return worst;
}

template <typename Record, typename Query>
double max_sensitivity_oracle(Query&& query, const std::vector<Record>& universe,
                              std::size_t max_m,
                              std::uint64_t enumeration_budget = 5'000'000) {
  return max_sensitivity_oracle<Record>(std::forward<Query>(query),
                                        std::span<const Record>(universe), max_m,
                                        enumeration_budget);
}

}  // namespace dpeda
