// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "greenran/errors.hpp"

namespace greenran {

/// Hyperparameters of the separable space-time kernel
///
///   k((az,el,t),(az',el',t')) = s2 * exp(-d_az^2 / 2 l_az^2)
///                                  * exp(-d_el^2 / 2 l_el^2)
///                                  * exp(-|dt| / l_t)
///
/// Squared-exponential across beam indices, Ornstein-Uhlenbeck across slots.
struct KernelSpec {
  double lengthscale_az = 1.5;   // beam indices
  double lengthscale_el = 1.5;   // beam indices
  double lengthscale_time = 8.0; // slots
  double signal_variance = 25.0; // dB^2
  double noise_variance = 1.0;   // dB^2

  void validate() const {
    if (!(lengthscale_az > 0.0) || !(lengthscale_el > 0.0) || !(lengthscale_time > 0.0))
      throw InvalidArgument("kernel lengthscales must be strictly positive");
    if (!(signal_variance > 0.0))
      throw InvalidArgument("kernel signal_variance must be strictly positive");
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
      throw InvalidArgument("kernel noise_variance must be non-negative");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// A beam index on the transmit grid at a given time slot.
struct BeamPoint {
  int az = 0;
  int el = 0;
  std::int64_t slot = 0;

  friend bool operator==(const BeamPoint&, const BeamPoint&) = default;
};

struct RsrpSample {
  BeamPoint point;
  double rsrp = 0.0; // dBm
};

struct PosteriorPoint {
  double mean = 0.0;     // dBm
  double variance = 0.0; // dB^2, latent function (no observation noise)
};

inline double kernel_eval(const KernelSpec& spec, const BeamPoint& a, const BeamPoint& b) {
  const double daz = static_cast<double>(a.az - b.az) / spec.lengthscale_az;
  const double del = static_cast<double>(a.el - b.el) / spec.lengthscale_el;
  const double dt = std::abs(static_cast<double>(a.slot - b.slot)) / spec.lengthscale_time;
  return spec.signal_variance * std::exp(-0.5 * (daz * daz + del * del) - dt);
}

/// Exact GP regression with constant prior mean, stored as a Cholesky factor
/// of K + noise*I and the weight vector alpha = (K + noise*I)^-1 (y - m).
///
/// Models are immutable after construction. `with_observation` returns a new
/// model whose factor is extended by one row instead of refactorized; the
/// result is the same conditional as `fit` on the enlarged set.
class GpModel {
public:
  /// Conditions on `obs`. Throws FactorizationFailure when K + noise*I is not
  /// numerically positive definite (typically duplicate points with zero noise).
  static GpModel fit(const KernelSpec& spec, double prior_mean, std::span<const RsrpSample> obs) {
    spec.validate();
    GpModel m(spec, prior_mean);
    m.observations_.assign(obs.begin(), obs.end());
    const auto n = static_cast<Eigen::Index>(obs.size());
    if (n == 0) return m;

    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      gram(i, i) = spec.signal_variance + spec.noise_variance;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double k = kernel_eval(spec, obs[i].point, obs[j].point);
        gram(i, j) = k;
        gram(j, i) = k;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw FactorizationFailure("kernel matrix is not positive definite");
    m.chol_ = llt.matrixL();
    m.check_pivots();
    m.solve_alpha();
    return m;
  }

  /// Model conditioned on the current observations plus `sample`.
  GpModel with_observation(const RsrpSample& sample) const {
    GpModel m(spec_, prior_mean_);
    m.observations_ = observations_;
    m.observations_.push_back(sample);
    const auto n = static_cast<Eigen::Index>(observations_.size());

    Eigen::VectorXd cross(n);
    for (Eigen::Index i = 0; i < n; ++i)
      cross(i) = kernel_eval(spec_, observations_[static_cast<std::size_t>(i)].point, sample.point);
    Eigen::VectorXd row = cross;
    if (n > 0) chol_.triangularView<Eigen::Lower>().solveInPlace(row);
    const double pivot2 = spec_.signal_variance + spec_.noise_variance - row.squaredNorm();
    if (!(pivot2 > pivot_floor()))
      throw FactorizationFailure("kernel matrix is not positive definite");

    m.chol_.resize(n + 1, n + 1);
    m.chol_.topLeftCorner(n, n) = chol_;
    m.chol_.topRightCorner(n, 1).setZero();
    m.chol_.bottomLeftCorner(1, n) = row.transpose();
    m.chol_(n, n) = std::sqrt(pivot2);
    m.solve_alpha();
    return m;
  }

  /// Latent posterior mean and variance at each query point.
  std::vector<PosteriorPoint> posterior(std::span<const BeamPoint> queries) const {
    std::vector<PosteriorPoint> out(queries.size());
    const auto n = static_cast<Eigen::Index>(observations_.size());
    const auto q = static_cast<Eigen::Index>(queries.size());
    if (n == 0) {
      for (auto& p : out) p = {prior_mean_, spec_.signal_variance};
      return out;
    }
    Eigen::MatrixXd cross(n, q);
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        cross(i, j) = kernel_eval(spec_, observations_[static_cast<std::size_t>(i)].point,
                                  queries[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd means = cross.transpose() * alpha_;
    chol_.triangularView<Eigen::Lower>().solveInPlace(cross);
    for (Eigen::Index j = 0; j < q; ++j) {
      auto& p = out[static_cast<std::size_t>(j)];
      p.mean = prior_mean_ + means(j);
      const double var = spec_.signal_variance - cross.col(j).squaredNorm();
      p.variance = var > 0.0 ? var : 0.0;
    }
    return out;
  }

  PosteriorPoint posterior(const BeamPoint& query) const {
    return posterior(std::span<const BeamPoint>(&query, 1)).front();
  }

  /// log p(y | X) under the fitted hyperparameters. Diagnostic only.
  double log_marginal_likelihood() const {
    const auto n = static_cast<Eigen::Index>(observations_.size());
    if (n == 0) throw InvalidArgument("log marginal likelihood needs at least one observation");
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(chol_(i, i));
    return -0.5 * residuals().dot(alpha_) - log_det_half -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  }

  const KernelSpec& spec() const noexcept { return spec_; }
  double prior_mean() const noexcept { return prior_mean_; }
  const std::vector<RsrpSample>& observations() const noexcept { return observations_; }
  std::size_t size() const noexcept { return observations_.size(); }
  const Eigen::MatrixXd& factor() const noexcept { return chol_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }

private:
  GpModel(const KernelSpec& spec, double prior_mean) : spec_(spec), prior_mean_(prior_mean) {}

  // Relative floor on squared pivots: anything smaller is rounding noise on a
  // singular matrix.
  double pivot_floor() const { return 1e-12 * (spec_.signal_variance + spec_.noise_variance); }

  void check_pivots() const {
    for (Eigen::Index i = 0; i < chol_.rows(); ++i) {
      const double d = chol_(i, i);
      if (!(d * d > pivot_floor()))
        throw FactorizationFailure("kernel matrix is not numerically positive definite");
    }
  }

  Eigen::VectorXd residuals() const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(observations_.size()));
    for (std::size_t i = 0; i < observations_.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = observations_[i].rsrp - prior_mean_;
    return r;
  }

  void solve_alpha() {
    alpha_ = residuals();
    chol_.triangularView<Eigen::Lower>().solveInPlace(alpha_);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
  }

  KernelSpec spec_;
  double prior_mean_;
  std::vector<RsrpSample> observations_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
};

/// Posterior over a fixed query set that can absorb observations located at
/// one of the queries with a rank-one update, O(n q) per observation instead
/// of a fresh solve. Keeps V = L^-1 K(X, Q) alongside the means and variances.
class QueryPosterior {
public:
  QueryPosterior(const GpModel& model, std::span<const BeamPoint> queries)
      : spec_(model.spec()), queries_(queries.begin(), queries.end()), values_(model.posterior(queries)) {
    const auto n = static_cast<Eigen::Index>(model.size());
    const auto q = static_cast<Eigen::Index>(queries_.size());
    proj_.resize(n, q);
    for (Eigen::Index j = 0; j < q; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        proj_(i, j) = kernel_eval(spec_, model.observations()[static_cast<std::size_t>(i)].point,
                                  queries_[static_cast<std::size_t>(j)]);
    if (n > 0) model.factor().triangularView<Eigen::Lower>().solveInPlace(proj_);
  }

  /// Conditions on an observation `y` taken at queries[j].
  void condition_on_query(std::size_t j, double y) {
    const auto q = static_cast<Eigen::Index>(queries_.size());
    const auto jj = static_cast<Eigen::Index>(j);
    Eigen::VectorXd cov(q);
    for (Eigen::Index i = 0; i < q; ++i)
      cov(i) = kernel_eval(spec_, queries_[static_cast<std::size_t>(i)], queries_[j]);
    if (proj_.rows() > 0) cov.noalias() -= proj_.transpose() * proj_.col(jj);
    const double denom = cov(jj) + spec_.noise_variance;
    if (!(denom > 1e-12 * (spec_.signal_variance + spec_.noise_variance)))
      throw FactorizationFailure("kernel matrix is not positive definite");
    const double gain = (y - values_[j].mean) / denom;
    for (Eigen::Index i = 0; i < q; ++i) {
      auto& p = values_[static_cast<std::size_t>(i)];
      p.mean += cov(i) * gain;
      p.variance = std::max(0.0, p.variance - cov(i) * cov(i) / denom);
    }
    proj_.conservativeResize(proj_.rows() + 1, Eigen::NoChange);
    proj_.row(proj_.rows() - 1) = cov.transpose() / std::sqrt(denom);
  }

  const std::vector<PosteriorPoint>& values() const noexcept { return values_; }
  const std::vector<BeamPoint>& queries() const noexcept { return queries_; }

private:
  KernelSpec spec_;
  std::vector<BeamPoint> queries_;
  std::vector<PosteriorPoint> values_;
  Eigen::MatrixXd proj_;
};

} // namespace greenran
