/*
 * Copyright 2026 The cnnbound Authors
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

#include "cnnbound/linalg.hpp"

#include <Eigen/Eigenvalues>

#include "cnnbound/random.hpp"

namespace cnnbound {

namespace {

// The Rayleigh quotients of power iteration increase towards the top
// eigenvalue. With clustered top singular values the iterate direction
// converges slowly although the quotient is already accurate, so the
// remaining error is also estimated from blocks of increments assuming
// geometric decay: err ~ d * q / (1 - q) with q the ratio of successive block
// increments. The estimate is trusted only once two successive ratios agree,
// since faster components still decaying make early ratios too small.
bool eigenvalue_settled(const std::vector<double>& q, double rel_tol) {
  constexpr std::size_t block = 20;
  if (q.size() < 3 * block + 1) return false;
  const std::size_t k = q.size() - 1;
  const double d2 = q[k] - q[k - block];
  const double d1 = q[k - block] - q[k - 2 * block];
  const double d0 = q[k - 2 * block] - q[k - 3 * block];
  if (d2 <= 0.0) return d1 <= 0.0 && d0 <= 0.0;
  if (d1 <= 0.0 || d0 <= 0.0) return false;
  const double r1 = d1 / d0, r2 = d2 / d1;
  if (r1 >= 1.0 || r2 >= 1.0 || std::abs(r2 - r1) > 0.1 * r2) return false;
  const double ratio = std::max(r1, r2);
  return d2 * ratio / (1.0 - ratio) <= rel_tol * q[k];
}

// Top Ritz vector of A^T A after `steps` Lanczos steps with full
// reorthogonalization, started from unit v.
Vector lanczos_start(const LinearMap& apply, const LinearMap& adjoint, const Vector& v, int steps) {
  const Index n = v.size();
  const Index k = std::min<Index>(steps, n);
  Matrix basis(k, n);
  std::vector<double> alpha, beta;
  Vector q = v;
  for (Index j = 0; j < k; ++j) {
    basis.row(j) = q.transpose();
    Vector w = adjoint(apply(q));
    alpha.push_back(q.dot(w));
    for (int pass = 0; pass < 2; ++pass) {
      const Vector c = basis.topRows(j + 1) * w;
      w.noalias() -= basis.topRows(j + 1).transpose() * c;
    }
    const double b = w.norm();
    if (j + 1 == k || !(b > 1e-12 * std::abs(alpha.front()))) break;
    beta.push_back(b);
    q = w / b;
  }
  const Index m = static_cast<Index>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    t(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  const Eigen::VectorXd y = es.eigenvectors().col(m - 1);
  Vector out = basis.topRows(m).transpose() * y;
  const double norm = out.norm();
  return norm > 0.0 ? Vector(out / norm) : v;
}

}  // namespace

SpectralEstimate spectral_norm(const LinearMap& apply, const LinearMap& apply_adjoint,
                               Index input_dim, const SpectralOptions& options) {
  detail::require(options.rel_tol > 0.0, "spectral_norm: rel_tol must be positive");
  detail::require(options.restarts >= 1, "spectral_norm: need at least one restart");
  detail::require(options.max_iter >= 1, "spectral_norm: max_iter must be positive");
  detail::require(input_dim > 0, "spectral_norm: empty operator");

  SpectralEstimate best;
  best.value = 0.0;
  best.converged = true;
  for (int restart = 0; restart < options.restarts; ++restart) {
    Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(restart));
    Vector v(input_dim);
    for (Index i = 0; i < input_dim; ++i) v[i] = standard_normal(rng);
    v.normalize();
    if (options.lanczos_steps > 0) v = lanczos_start(apply, apply_adjoint, v, options.lanczos_steps);

    std::vector<double> history;
    std::vector<double> quotients;
    double lambda = 0.0;
    bool converged = false;
    int it = 0;
    for (; it < options.max_iter; ++it) {
      const Vector u = apply(v);
      lambda = u.squaredNorm();
      if (options.record_history) history.push_back(lambda);
      quotients.push_back(lambda);
      if (eigenvalue_settled(quotients, options.rel_tol)) {
        converged = true;
        ++it;
        break;
      }
      if (lambda == 0.0) {
        // v is in the null space; a different start is needed, which the
        // remaining restarts provide.
        converged = true;
        break;
      }
      Vector w = apply_adjoint(u);
      const double residual = (w - lambda * v).norm();
      const double w_norm = w.norm();
      v = w / w_norm;
      if (residual <= options.rel_tol * lambda) {
        lambda = apply(v).squaredNorm();
        if (options.record_history) history.push_back(lambda);
        converged = true;
        ++it;
        break;
      }
    }
    const double sigma = std::sqrt(lambda);
    best.iterations += it;
    best.converged = best.converged && converged;
    if (sigma > best.value) best.value = sigma;
    if (options.record_history) best.history.push_back(std::move(history));
  }
  return best;
}

SpectralEstimate spectral_norm(const Matrix& a, const SpectralOptions& options) {
  detail::require(a.rows() > 0 && a.cols() > 0, "spectral_norm: empty matrix");
  detail::require(a.allFinite(), "spectral_norm: non-finite entry");
  if ((a.array() == 0.0).all()) {
    SpectralEstimate zero;
    zero.value = 0.0;
    return zero;
  }
  const LinearMap apply = [&a](const Vector& x) -> Vector { return a * x; };
  const LinearMap adjoint = [&a](const Vector& y) -> Vector { return a.transpose() * y; };
  return spectral_norm(apply, adjoint, a.cols(), options);
}

}  // namespace cnnbound
