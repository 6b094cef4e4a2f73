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
#include <optional>
#include <string>
#include <vector>

#include "dpeda/error.hpp"
#include "dpeda/random.hpp"

namespace dpeda {

// Sensitivity and privacy loss of one release; `scale` is always
// sensitivity / epsilon.
class MechanismParams {
 public:
  MechanismParams(double sensitivity, double epsilon)
      : sensitivity_(sensitivity), epsilon_(epsilon) {
    if (!(sensitivity >= 0.0) || !std::isfinite(sensitivity)) {
      throw ParamError("sensitivity must be finite and >= 0");
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw ParamError("epsilon must be finite and > 0");
    }
    scale_ = sensitivity_ / epsilon_;
  }

  double sensitivity() const { return sensitivity_; }
  double epsilon() const { return epsilon_; }
  double scale() const { return scale_; }

 private:
  double sensitivity_;
  double epsilon_;
  double scale_;
};

// A released value. `true_value` is only ever populated in test mode.
struct NoisyValue {
  double value = 0.0;
  MechanismParams params{0.0, 1.0};
  std::optional<double> true_value;
};

// Laplace(0, scale) by inverse CDF. Floating-point snapping attacks are not
// mitigated.
inline double sample_laplace(double scale, Rng& rng) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw ParamError("Laplace scale must be finite and >= 0");
  }
  if (scale == 0.0) return 0.0;
  // u uniform on (-1/2, 1/2); the endpoint -1/2 would map to -inf.
  const double u = uniform_open01(rng) - 0.5;
  const double magnitude = -scale * std::log1p(-2.0 * std::fabs(u));
  return u < 0.0 ? -magnitude : magnitude;
}

inline NoisyValue laplace_mechanism(double true_value, const MechanismParams& params, Rng& rng) {
  return NoisyValue{true_value + sample_laplace(params.scale(), rng), params, std::nullopt};
}

// Selection probabilities exp(eps * s_j / (2 * sensitivity)), normalized.
// Scores are shifted by their maximum before exponentiation.
inline std::vector<double> exponential_mechanism_probabilities(const std::vector<double>& scores,
                                                               double score_sensitivity,
                                                               double epsilon) {
  if (scores.empty()) throw ParamError("exponential mechanism needs at least one candidate");
  if (!(score_sensitivity > 0.0) || !(epsilon > 0.0)) {
    throw ParamError("exponential mechanism needs positive sensitivity and epsilon");
  }
  double best = scores.front();
  for (double s : scores) {
    if (!std::isfinite(s)) throw ParamError("exponential mechanism scores must be finite");
    best = std::max(best, s);
  }
  std::vector<double> weights(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    weights[i] = std::exp(epsilon * (scores[i] - best) / (2.0 * score_sensitivity));
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  return weights;
}

// Returns the index of the selected candidate.
inline std::size_t exponential_mechanism(const std::vector<double>& scores,
                                         double score_sensitivity, double epsilon, Rng& rng) {
  const auto probs = exponential_mechanism_probabilities(scores, score_sensitivity, epsilon);
  if (probs.size() == 1) return 0;
  return sample_discrete(rng, probs);
}

template <typename Candidate>
const Candidate& exponential_mechanism(const std::vector<Candidate>& candidates,
                                       const std::vector<double>& scores,
                                       double score_sensitivity, double epsilon, Rng& rng) {
  if (candidates.empty()) throw ParamError("exponential mechanism needs at least one candidate");
  if (candidates.size() != scores.size()) {
    throw ParamError("exponential mechanism: one score per candidate required");
  }
  return candidates[exponential_mechanism(scores, score_sensitivity, epsilon, rng)];
}

// How releases are produced. `add_noise = false` turns every mechanism into
// the identity (charges are still recorded); `test_mode` attaches the true
// value to each release so experiments can measure error.
struct ReleaseOptions {
  bool add_noise = true;
  bool test_mode = false;
};

// Owns the random stream and the release options for one evaluator.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, ReleaseOptions options = {})
      : rng_(seed), options_(options) {}
  NoiseSource(Rng rng, ReleaseOptions options) : rng_(std::move(rng)), options_(options) {}

  Rng& rng() { return rng_; }
  const ReleaseOptions& options() const { return options_; }

  NoisyValue laplace(double true_value, const MechanismParams& params) {
    NoisyValue out{true_value, params, std::nullopt};
    if (options_.add_noise) out.value = true_value + sample_laplace(params.scale(), rng_);
    if (options_.test_mode) out.true_value = true_value;
    return out;
  }

  // Raw noisy count; used for cells that are post-processed before release.
  double perturb(double true_value, double scale) {
    return options_.add_noise ? true_value + sample_laplace(scale, rng_) : true_value;
  }

 private:
  Rng rng_;
  ReleaseOptions options_;
};

}  // namespace dpeda
