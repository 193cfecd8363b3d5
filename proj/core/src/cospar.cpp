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

#include "handover/cospar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace handover {

namespace {

constexpr double kLowerTail = -6.0;
constexpr int kMillsTerms = 60;
constexpr double kCorrelationJitter = 1e-10;

// Mills ratio (1 - Φ(x)) / φ(x) for x >= 6 by its continued fraction.
double mills_ratio(double x) {
  double t = x;
  for (int k = kMillsTerms; k >= 1; --k) t = x + k / t;
  return 1.0 / t;
}

double log_phi(double z) { return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi); }

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
}

void check_record(const PreferenceRecord& r, std::size_t size) {
  if (r.winner == r.loser) throw std::invalid_argument("record winner equals loser");
  if (r.winner >= size || r.loser >= size) throw std::out_of_range("record action out of range");
}

std::size_t argmax(const Eigen::VectorXd& v, std::size_t skip = std::numeric_limits<std::size_t>::max()) {
  std::size_t best = skip == 0 ? 1 : 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()); ++i) {
    if (i != skip && v[static_cast<Eigen::Index>(i)] > v[static_cast<Eigen::Index>(best)]) best = i;
  }
  return best;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Upper half as 1 - tail so that Φ(z) + Φ(-z) rounds to exactly 1.
double normal_cdf(double z) {
  if (z < 0.0) return 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return 1.0 - 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double log_normal_cdf(double z) {
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z >= kLowerTail) return std::log(normal_cdf(z));
  return log_phi(z) + std::log(mills_ratio(-z));
}

double inverse_mills_ratio(double z) {
  if (z >= kLowerTail) return std::exp(log_phi(z)) / normal_cdf(z);
  return 1.0 / mills_ratio(-z);
}

double preference_likelihood(double f_winner, double f_loser, double sigma) {
  check_sigma(sigma);
  return normal_cdf((f_winner - f_loser) / (std::numbers::sqrt2 * sigma));
}

// ---------------------------------------------------------------------------

ActionGrid::ActionGrid(Levels levels) : levels_(levels), size_(1) {
  for (const auto n : levels_) {
    if (n == 0) throw std::invalid_argument("grid axes need at least one level");
    size_ *= n;
  }
}

ActionGrid::Levels ActionGrid::unravel(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("action index out of range");
  Levels multi{};
  for (std::size_t d = kDims; d-- > 0;) {
    multi[d] = index % levels_[d];
    index /= levels_[d];
  }
  return multi;
}

std::size_t ActionGrid::ravel(const Levels& multi) const {
  std::size_t index = 0;
  for (std::size_t d = 0; d < kDims; ++d) {
    if (multi[d] >= levels_[d]) throw std::out_of_range("grid coordinate out of range");
    index = index * levels_[d] + multi[d];
  }
  return index;
}

double ActionGrid::axis_lo(std::size_t d) {
  static constexpr std::array<double, kDims> lo{HandoverParams::kStiffnessMin, HandoverParams::kDampingMin,
                                                HandoverParams::kForecastMin, HandoverParams::kReleaseMin};
  return lo.at(d);
}

double ActionGrid::axis_hi(std::size_t d) {
  static constexpr std::array<double, kDims> hi{HandoverParams::kStiffnessMax, HandoverParams::kDampingMax,
                                                HandoverParams::kForecastMax, HandoverParams::kReleaseMax};
  return hi.at(d);
}

Eigen::Vector4d ActionGrid::normalized(std::size_t index) const {
  const Levels multi = unravel(index);
  Eigen::Vector4d x;
  for (std::size_t d = 0; d < kDims; ++d) {
    x[static_cast<Eigen::Index>(d)] =
        levels_[d] == 1 ? 0.5 : static_cast<double>(multi[d]) / static_cast<double>(levels_[d] - 1);
  }
  return x;
}

HandoverParams ActionGrid::params(std::size_t index) const {
  const Eigen::Vector4d x = normalized(index);
  std::array<double, kDims> v{};
  for (std::size_t d = 0; d < kDims; ++d) {
    v[d] = axis_lo(d) + x[static_cast<Eigen::Index>(d)] * (axis_hi(d) - axis_lo(d));
  }
  return {v[0], v[1], v[2], v[3]};
}

Eigen::Vector4d ActionGrid::normalize(const HandoverParams& p) {
  const std::array<double, kDims> v{p.stiffness, p.damping, p.forecast_time, p.release_force};
  Eigen::Vector4d x;
  for (std::size_t d = 0; d < kDims; ++d) {
    x[static_cast<Eigen::Index>(d)] = (v[d] - axis_lo(d)) / (axis_hi(d) - axis_lo(d));
  }
  return x;
}

std::size_t ActionGrid::nearest(const HandoverParams& p) const {
  const Eigen::Vector4d x = normalize(p);
  Levels multi{};
  for (std::size_t d = 0; d < kDims; ++d) {
    const double steps = static_cast<double>(levels_[d] - 1);
    multi[d] = levels_[d] == 1
                   ? 0
                   : static_cast<std::size_t>(std::lround(std::clamp(x[static_cast<Eigen::Index>(d)], 0.0, 1.0) * steps));
  }
  return ravel(multi);
}

void to_json(nlohmann::json& j, const ActionGrid& g) {
  nlohmann::json axes = nlohmann::json::array();
  const std::array<const char*, ActionGrid::kDims> names{"K", "B", "tf", "fr"};
  for (std::size_t d = 0; d < ActionGrid::kDims; ++d) {
    axes.push_back({{"name", names[d]},
                    {"lo", ActionGrid::axis_lo(d)},
                    {"hi", ActionGrid::axis_hi(d)},
                    {"levels", g.levels()[d]}});
  }
  j = {{"axes", axes}, {"size", g.size()}};
}

// ---------------------------------------------------------------------------

GridPrior::GridPrior(ActionGrid grid, double lengthscale, double signal_variance)
    : grid_(grid), lengthscale_(lengthscale), signal_variance_(signal_variance) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw std::invalid_argument("prior lengthscale must be positive");
  }
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw std::invalid_argument("prior signal variance must be positive");
  }
  for (std::size_t d = 0; d < ActionGrid::kDims; ++d) {
    const auto n = static_cast<Eigen::Index>(grid_.levels()[d]);
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        const double ta = n == 1 ? 0.5 : static_cast<double>(a) / static_cast<double>(n - 1);
        const double tb = n == 1 ? 0.5 : static_cast<double>(b) / static_cast<double>(n - 1);
        const double u = (ta - tb) / lengthscale_;
        r(a, b) = std::exp(-0.5 * u * u);
      }
    }
    r.diagonal().array() += kCorrelationJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) throw std::runtime_error("prior correlation not positive definite");
    corr_[d] = r;
    chol_[d] = llt.matrixL();
  }
}

double GridPrior::covariance(std::size_t i, std::size_t j) const {
  const auto a = grid_.unravel(i);
  const auto b = grid_.unravel(j);
  double c = signal_variance_;
  for (std::size_t d = 0; d < ActionGrid::kDims; ++d) {
    c *= corr_[d](static_cast<Eigen::Index>(a[d]), static_cast<Eigen::Index>(b[d]));
  }
  return c;
}

Eigen::MatrixXd GridPrior::columns(std::span<const std::size_t> cols) const {
  const auto n = grid_.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  std::vector<ActionGrid::Levels> col_multi;
  col_multi.reserve(cols.size());
  for (const auto c : cols) col_multi.push_back(grid_.unravel(c));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = grid_.unravel(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double c = signal_variance_;
      for (std::size_t d = 0; d < ActionGrid::kDims; ++d) {
        c *= corr_[d](static_cast<Eigen::Index>(a[d]), static_cast<Eigen::Index>(col_multi[k][d]));
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = c;
    }
  }
  return out;
}

Eigen::MatrixXd GridPrior::dense() const {
  std::vector<std::size_t> all(grid_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return columns(all);
}

Eigen::VectorXd GridPrior::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = grid_.size();
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);

  // Apply each axis factor along its mode of the row-major tensor.
  std::size_t stride = n;
  std::vector<double> fiber;
  for (std::size_t d = 0; d < ActionGrid::kDims; ++d) {
    const std::size_t len = grid_.levels()[d];
    stride /= len;
    const std::size_t outer = n / (len * stride);
    const Eigen::MatrixXd& l = chol_[d];
    fiber.resize(len);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t r = 0; r < stride; ++r) {
        const std::size_t base = o * len * stride + r;
        for (std::size_t j = 0; j < len; ++j) fiber[j] = x[static_cast<Eigen::Index>(base + j * stride)];
        for (std::size_t j = 0; j < len; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k <= j; ++k) s += l(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * fiber[k];
          x[static_cast<Eigen::Index>(base + j * stride)] = s;
        }
      }
    }
  }
  return std::sqrt(signal_variance_) * x;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const PreferenceRecord& r) {
  j = {{"winner", r.winner}, {"loser", r.loser}};
}

void from_json(const nlohmann::json& j, PreferenceRecord& r) {
  r.winner = j.at("winner").get<std::size_t>();
  r.loser = j.at("loser").get<std::size_t>();
}

double log_likelihood(std::span<const PreferenceRecord> records, const Eigen::VectorXd& f,
                      double sigma) {
  check_sigma(sigma);
  double sum = 0.0;
  for (const auto& r : records) {
    check_record(r, static_cast<std::size_t>(f.size()));
    sum += log_normal_cdf((f[static_cast<Eigen::Index>(r.winner)] - f[static_cast<Eigen::Index>(r.loser)]) /
                          (std::numbers::sqrt2 * sigma));
  }
  return sum;
}

namespace {

// Likelihood terms on the support: records rewritten to local indices.
struct LocalRecords {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  double scale;  // 1 / (√2 σ)

  double log_likelihood(const Eigen::VectorXd& f) const {
    double sum = 0.0;
    for (const auto& [w, l] : pairs) sum += log_normal_cdf((f[w] - f[l]) * scale);
    return sum;
  }

  // Gradient, negative Hessian and its factor (columns sqrt(c_k) d_k).
  void derivatives(const Eigen::VectorXd& f, Eigen::VectorXd& grad, Eigen::MatrixXd& curvature,
                   Eigen::MatrixXd& factor) const {
    const Eigen::Index u = f.size();
    grad = Eigen::VectorXd::Zero(u);
    curvature = Eigen::MatrixXd::Zero(u, u);
    factor = Eigen::MatrixXd::Zero(u, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [w, l] = pairs[k];
      const double z = (f[w] - f[l]) * scale;
      const double r = inverse_mills_ratio(z);
      const double g = r * scale;
      grad[w] += g;
      grad[l] -= g;
      const double c = r * (z + r) * scale * scale;
      curvature(w, w) += c;
      curvature(l, l) += c;
      curvature(w, l) -= c;
      curvature(l, w) -= c;
      const double s = std::sqrt(std::max(c, 0.0));
      factor(w, static_cast<Eigen::Index>(k)) = s;
      factor(l, static_cast<Eigen::Index>(k)) = -s;
    }
  }
};

}  // namespace

PreferencePosterior laplace_posterior(std::vector<PreferenceRecord> records,
                                      std::shared_ptr<const GridPrior> prior, double sigma,
                                      const LaplaceOptions& options) {
  if (!prior) throw std::invalid_argument("missing prior");
  check_sigma(sigma);
  const std::size_t n = prior->grid().size();
  for (const auto& r : records) check_record(r, n);

  PreferencePosterior post;
  post.prior_ = std::move(prior);
  post.sigma_ = sigma;
  post.records_ = std::move(records);

  auto& support = post.support_;
  for (const auto& r : post.records_) {
    support.push_back(r.winner);
    support.push_back(r.loser);
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  const auto u = static_cast<Eigen::Index>(support.size());

  post.cross_ = post.prior_->columns(support);
  if (u == 0) {
    post.alpha_.resize(0);
    post.mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    return post;
  }

  Eigen::MatrixXd s(u, u);
  for (Eigen::Index i = 0; i < u; ++i) s.row(i) = post.cross_.row(static_cast<Eigen::Index>(support[static_cast<std::size_t>(i)]));
  s = 0.5 * (s + s.transpose()).eval();

  LocalRecords local{{}, 1.0 / (std::numbers::sqrt2 * sigma)};
  for (const auto& r : post.records_) {
    const auto w = std::lower_bound(support.begin(), support.end(), r.winner) - support.begin();
    const auto l = std::lower_bound(support.begin(), support.end(), r.loser) - support.begin();
    local.pairs.emplace_back(w, l);
  }

  const auto objective = [&](const Eigen::VectorXd& a) {
    const Eigen::VectorXd f = s * a;
    return local.log_likelihood(f) - 0.5 * a.dot(f);
  };

  Eigen::VectorXd a = Eigen::VectorXd::Zero(u);
  Eigen::VectorXd grad;
  Eigen::MatrixXd w;
  Eigen::MatrixXd factor;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(u, u);
  double current = objective(a);
  double gnorm = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (;; ++it) {
    const Eigen::VectorXd f = s * a;
    local.derivatives(f, grad, w, factor);
    gnorm = (grad - a).lpNorm<Eigen::Infinity>();
    if (gnorm < options.tolerance) break;
    if (it == options.max_iterations) {
      std::ostringstream os;
      os << "Laplace iteration did not converge (gradient norm " << gnorm << ")";
      throw ConvergenceError(os.str(), gnorm);
    }
    const Eigen::VectorXd target = (identity + w * s).partialPivLu().solve(w * f + grad);
    const Eigen::VectorXd delta = target - a;
    double step = 1.0;
    for (std::size_t h = 0;; ++h) {
      const Eigen::VectorXd trial = a + step * delta;
      const double value = objective(trial);
      if (value >= current - 1e-13 * std::abs(current) || h == options.max_halvings) {
        a = trial;
        current = value;
        break;
      }
      step *= 0.5;
    }
  }

  post.alpha_ = a;
  post.curvature_ = w;
  post.noise_factor_ = factor;
  post.system_ = (identity + w * s).partialPivLu();
  post.mean_ = post.cross_ * a;
  post.gradient_norm_ = gnorm;
  post.iterations_ = it;
  return post;
}

std::size_t PreferencePosterior::incumbent() const { return argmax(mean_); }

Eigen::VectorXd PreferencePosterior::variance() const {
  const auto n = static_cast<Eigen::Index>(grid().size());
  Eigen::VectorXd var(n);
  const double prior_var = prior_->covariance(0, 0);
  var.setConstant(prior_var);
  if (support_.empty()) return var;
  const Eigen::MatrixXd c = system_.solve(curvature_);  // W (I + Σ_UU W)^-1
  const Eigen::MatrixXd m = cross_ * c;
  var -= (m.array() * cross_.array()).rowwise().sum().matrix();
  return var;
}

Eigen::MatrixXd PreferencePosterior::covariance() const {
  Eigen::MatrixXd cov = prior_->dense();
  if (!support_.empty()) {
    const Eigen::MatrixXd c = system_.solve(curvature_);
    cov -= cross_ * c * cross_.transpose();
  }
  return 0.5 * (cov + cov.transpose());
}

Eigen::VectorXd PreferencePosterior::sample(std::mt19937_64& rng) const {
  Eigen::VectorXd h = prior_->sample(rng);
  if (support_.empty()) return mean_ + h;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eta(noise_factor_.cols());
  for (Eigen::Index k = 0; k < eta.size(); ++k) eta[k] = normal(rng);
  Eigen::VectorXd h_u(static_cast<Eigen::Index>(support_.size()));
  for (std::size_t i = 0; i < support_.size(); ++i) h_u[static_cast<Eigen::Index>(i)] = h[static_cast<Eigen::Index>(support_[i])];
  const Eigen::VectorXd correction = system_.solve(curvature_ * h_u + noise_factor_ * eta);
  return mean_ + h - cross_ * correction;
}

PreferencePosterior update(const PreferencePosterior& posterior, const PreferenceRecord& record,
                           const LaplaceOptions& options) {
  check_record(record, posterior.grid().size());
  auto records = posterior.records();
  records.push_back(record);
  return laplace_posterior(std::move(records), posterior.shared_prior(), posterior.sigma(),
                           options);
}

std::pair<std::size_t, std::size_t> self_sparring(const std::function<Eigen::VectorXd()>& draw) {
  const std::size_t a = argmax(draw());
  Eigen::VectorXd gb;
  for (int attempt = 0; attempt <= 10; ++attempt) {
    gb = draw();
    if (gb.size() < 2) throw std::invalid_argument("query needs at least two actions");
    const std::size_t b = argmax(gb);
    if (b != a) return {a, b};
  }
  return {a, argmax(gb, a)};
}

std::pair<std::size_t, std::size_t> select_query(const PreferencePosterior& posterior,
                                                 std::uint64_t seed) {
  if (posterior.grid().size() < 2) throw std::invalid_argument("query needs at least two actions");
  std::mt19937_64 rng(seed);
  return self_sparring([&] { return posterior.sample(rng); });
}

PreferenceRecord synthetic_oracle(std::size_t a, std::size_t b, const Utility& utility,
                                  double sigma, std::uint64_t seed) {
  if (a == b) throw std::invalid_argument("oracle needs two distinct actions");
  const double p = preference_likelihood(utility(a), utility(b), sigma);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return uniform(rng) < p ? PreferenceRecord{a, b} : PreferenceRecord{b, a};
}

std::vector<double> peaked_utility(const ActionGrid& grid, const HandoverParams& peak,
                                   double width) {
  if (!(width > 0.0)) throw std::invalid_argument("utility width must be positive");
  const Eigen::Vector4d centre = ActionGrid::normalize(peak);
  std::vector<double> u(grid.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = std::exp(-(grid.normalized(i) - centre).squaredNorm() / (2.0 * width * width));
  }
  return u;
}

std::vector<double> scale_to_prior(std::vector<double> utility, double signal_variance) {
  if (utility.size() < 2) throw std::invalid_argument("utility needs at least two actions");
  if (!(signal_variance > 0.0)) throw std::invalid_argument("signal variance must be positive");
  Eigen::Map<Eigen::ArrayXd> u(utility.data(), static_cast<Eigen::Index>(utility.size()));
  const double mean = u.mean();
  const double sd = std::sqrt((u - mean).square().mean());
  if (!(sd > 0.0)) throw std::invalid_argument("constant utility cannot be scaled");
  u = (u - mean) * (std::sqrt(signal_variance) / sd);
  return utility;
}

void CosparConfig::validate() const {
  std::size_t size = 1;
  for (const auto n : levels) {
    if (n == 0) throw std::invalid_argument("grid levels must be positive");
    size *= n;
  }
  if (size < 2) throw std::invalid_argument("grid needs at least two actions");
  if (!(lengthscale > 0.0)) throw std::invalid_argument("prior lengthscale must be positive");
  if (!(signal_variance > 0.0)) throw std::invalid_argument("prior signal variance must be positive");
  check_sigma(sigma);
  if (iterations == 0) throw std::invalid_argument("iterations must be positive");
}

nlohmann::json posterior_summary(const PreferencePosterior& posterior) {
  const std::size_t best = posterior.incumbent();
  const Eigen::VectorXd var = posterior.variance();
  return {{"grid", posterior.grid()},
          {"records", posterior.records()},
          {"sigma", posterior.sigma()},
          {"prior", {{"lengthscale", posterior.prior().lengthscale()},
                     {"signal_variance", posterior.prior().signal_variance()}}},
          {"mean", std::vector<double>(posterior.mean().begin(), posterior.mean().end())},
          {"incumbent", {{"index", best},
                         {"params", posterior.grid().params(best)},
                         {"mean", posterior.mean()[static_cast<Eigen::Index>(best)]},
                         {"variance", var[static_cast<Eigen::Index>(best)]}}},
          {"iterations", posterior.iterations()},
          {"gradient_norm", posterior.gradient_norm()}};
}

SimulationRun simulate_session(const CosparConfig& config, const std::vector<double>& utility,
                               std::uint64_t seed) {
  config.validate();
  const ActionGrid grid(config.levels);
  if (utility.size() != grid.size()) throw std::invalid_argument("utility size differs from grid");
  auto prior = std::make_shared<const GridPrior>(grid, config.lengthscale, config.signal_variance);
  PreferencePosterior post = laplace_posterior({}, prior, config.sigma);
  const Utility u = [&](std::size_t i) { return utility[i]; };
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto [a, b] = select_query(post, query_seed(seed, it));
    post = update(post, synthetic_oracle(a, b, u, config.sigma, oracle_seed(seed, it)));
  }
  SimulationRun run{seed, post.incumbent(), 0.0, 0.0, false};
  run.incumbent_utility = utility[run.incumbent];
  std::size_t below = 0;
  std::size_t above = 0;
  for (const double v : utility) {
    if (v <= run.incumbent_utility) ++below;
    if (v > run.incumbent_utility) ++above;
  }
  run.utility_quantile = static_cast<double>(below) / static_cast<double>(utility.size());
  run.top_decile = above + 1 <= utility.size() / 10;
  return run;
}

}  // namespace handover
