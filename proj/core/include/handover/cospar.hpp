/*
 * Copyright 2026 The Handover Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "handover/impedance.hpp"

namespace handover {

/// Standard normal CDF.
double normal_cdf(double z);
/// log Φ(z), accurate far into the lower tail.
double log_normal_cdf(double z);
/// φ(z) / Φ(z), stable for very negative z.
double inverse_mills_ratio(double z);

/// Φ((f_winner - f_loser) / (√2 σ)).
double preference_likelihood(double f_winner, double f_loser, double sigma);

/// Regular grid over the four handover parameters. Actions are numbered row-major
/// with the release force varying fastest.
class ActionGrid {
 public:
  static constexpr std::size_t kDims = 4;
  using Levels = std::array<std::size_t, kDims>;

  explicit ActionGrid(Levels levels = {7, 6, 6, 7});

  std::size_t size() const { return size_; }
  const Levels& levels() const { return levels_; }
  Levels unravel(std::size_t index) const;
  std::size_t ravel(const Levels& multi) const;

  /// Coordinates scaled to [0, 1] per dimension (0.5 on single-level axes).
  Eigen::Vector4d normalized(std::size_t index) const;
  HandoverParams params(std::size_t index) const;
  /// Grid point with the smallest normalized distance to `p`.
  std::size_t nearest(const HandoverParams& p) const;

  static Eigen::Vector4d normalize(const HandoverParams& p);
  static double axis_lo(std::size_t d);
  static double axis_hi(std::size_t d);

  bool operator==(const ActionGrid& o) const { return levels_ == o.levels_; }

 private:
  Levels levels_;
  std::size_t size_;
};

void to_json(nlohmann::json& j, const ActionGrid& g);

/// Separable squared-exponential prior over normalized grid coordinates. The prior
/// covariance is the Kronecker product of the per-axis correlation matrices scaled by
/// the signal variance, so samples only need the small per-axis factors.
class GridPrior {
 public:
  GridPrior(ActionGrid grid, double lengthscale = 0.3, double signal_variance = 1.0);

  const ActionGrid& grid() const { return grid_; }
  double lengthscale() const { return lengthscale_; }
  double signal_variance() const { return signal_variance_; }

  double covariance(std::size_t i, std::size_t j) const;
  /// Columns of the prior covariance for `cols`, A x |cols|.
  Eigen::MatrixXd columns(std::span<const std::size_t> cols) const;
  /// Full A x A matrix; meant for small grids and tests.
  Eigen::MatrixXd dense() const;
  /// One draw from N(0, Σ).
  Eigen::VectorXd sample(std::mt19937_64& rng) const;

 private:
  ActionGrid grid_;
  double lengthscale_;
  double signal_variance_;
  std::array<Eigen::MatrixXd, ActionGrid::kDims> corr_;
  std::array<Eigen::MatrixXd, ActionGrid::kDims> chol_;
};

struct PreferenceRecord {
  std::size_t winner;
  std::size_t loser;

  bool operator==(const PreferenceRecord&) const = default;
};

void to_json(nlohmann::json& j, const PreferenceRecord& r);
void from_json(const nlohmann::json& j, PreferenceRecord& r);

/// Σ_k log Φ((f_w - f_l) / (√2 σ)).
double log_likelihood(std::span<const PreferenceRecord> records, const Eigen::VectorXd& f,
                      double sigma);

struct LaplaceOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-8;  // on the objective gradient, infinity norm
  std::size_t max_halvings = 20;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : std::runtime_error(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

/// Laplace approximation of the utility posterior given preference records. The
/// likelihood only touches the support U (actions named in some record), so the
/// mode is f = Σ[:, U] a and the covariance is Σ - Σ[:, U] C Σ[U, :] for a |U| x |U|
/// matrix C; nothing of size A x A is formed unless asked for.
class PreferencePosterior {
 public:
  const GridPrior& prior() const { return *prior_; }
  const std::shared_ptr<const GridPrior>& shared_prior() const { return prior_; }
  const ActionGrid& grid() const { return prior_->grid(); }
  double sigma() const { return sigma_; }
  const std::vector<PreferenceRecord>& records() const { return records_; }
  const std::vector<std::size_t>& support() const { return support_; }

  const Eigen::VectorXd& mean() const { return mean_; }
  /// Posterior-mean argmax (lowest index on ties).
  std::size_t incumbent() const;
  Eigen::VectorXd variance() const;
  Eigen::MatrixXd covariance() const;
  /// Objective gradient infinity norm at the mode.
  double gradient_norm() const { return gradient_norm_; }
  std::size_t iterations() const { return iterations_; }

  /// One draw from the Laplace posterior.
  Eigen::VectorXd sample(std::mt19937_64& rng) const;

 private:
  friend PreferencePosterior laplace_posterior(std::vector<PreferenceRecord>,
                                               std::shared_ptr<const GridPrior>, double,
                                               const LaplaceOptions&);
  std::shared_ptr<const GridPrior> prior_;
  double sigma_ = 0.2;
  std::vector<PreferenceRecord> records_;
  std::vector<std::size_t> support_;
  Eigen::MatrixXd cross_;      // Σ[:, U]
  Eigen::VectorXd alpha_;      // mode weights a
  Eigen::MatrixXd curvature_;  // W, negative likelihood Hessian on U
  Eigen::MatrixXd noise_factor_;  // columns sqrt(c_k) d_k, so W = N Nᵀ
  Eigen::PartialPivLU<Eigen::MatrixXd> system_;  // I + W Σ[U, U]
  Eigen::VectorXd mean_;
  double gradient_norm_ = 0.0;
  std::size_t iterations_ = 0;
};

PreferencePosterior laplace_posterior(std::vector<PreferenceRecord> records,
                                      std::shared_ptr<const GridPrior> prior, double sigma,
                                      const LaplaceOptions& options = {});

/// Refits from scratch with `record` appended.
PreferencePosterior update(const PreferencePosterior& posterior, const PreferenceRecord& record,
                           const LaplaceOptions& options = {});

/// Argmaxes of two draws, redrawing the second up to ten times while it ties the
/// first, then the second draw's runner-up.
std::pair<std::size_t, std::size_t> self_sparring(const std::function<Eigen::VectorXd()>& draw);

/// Self-sparring query: argmaxes of two independent posterior draws, redrawing the
/// second up to ten times on a tie before falling back to its runner-up.
std::pair<std::size_t, std::size_t> select_query(const PreferencePosterior& posterior,
                                                 std::uint64_t seed);

/// Deterministic child seed for stream (a, b) of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

/// Seeds used by iteration `iteration` of a preference loop for the query and for the
/// synthetic oracle's answer.
inline std::uint64_t query_seed(std::uint64_t seed, std::size_t iteration) {
  return derive_seed(seed, iteration, 1);
}
inline std::uint64_t oracle_seed(std::uint64_t seed, std::size_t iteration) {
  return derive_seed(seed, iteration, 2);
}

using Utility = std::function<double(std::size_t)>;

/// Noisy preference between actions a and b under a known utility.
PreferenceRecord synthetic_oracle(std::size_t a, std::size_t b, const Utility& utility,
                                  double sigma, std::uint64_t seed);

/// Smooth unimodal utility over the grid, exp(-|x - peak|² / (2 width²)) in
/// normalized coordinates.
std::vector<double> peaked_utility(const ActionGrid& grid, const HandoverParams& peak,
                                   double width = 0.35);

/// Shifts and scales `utility` to zero mean and standard deviation sqrt(signal_variance)
/// over the grid, the spread the preference prior expects.
std::vector<double> scale_to_prior(std::vector<double> utility, double signal_variance);

struct CosparConfig {
  ActionGrid::Levels levels{7, 6, 6, 7};
  double lengthscale = 0.3;
  double signal_variance = 1.0;
  double sigma = 0.2;
  std::size_t iterations = 20;

  void validate() const;
};

/// Preference-learning session state.
nlohmann::json posterior_summary(const PreferencePosterior& posterior);

struct SimulationRun {
  std::uint64_t seed;
  std::size_t incumbent;
  double incumbent_utility;
  double utility_quantile;  // fraction of grid actions with utility <= the incumbent's
  bool top_decile;
};

/// Closed-loop preference learning against the synthetic oracle.
SimulationRun simulate_session(const CosparConfig& config, const std::vector<double>& utility,
                               std::uint64_t seed);

}  // namespace handover
