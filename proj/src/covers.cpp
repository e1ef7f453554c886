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

#include "cnnbound/covers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "cnnbound/random.hpp"

namespace cnnbound {

using detail::require;

double cover_size_bound(CoverKind kind, const CoverArgs& p) {
  require(p.a > 0 && p.b > 0 && p.eps > 0 && p.n > 0 && p.m > 0 && p.U > 0 && p.O > 0 && p.rho > 0,
          "cover_size_bound: all arguments must be positive");
  const double ab = p.a * p.b;
  const double scale = ab * ab / (p.eps * p.eps);
  switch (kind) {
    case CoverKind::maurey:
      return 36.0 * scale * std::log2(8.0 * ab * p.n / p.eps + 6.0 * p.n + 1.0);
    case CoverKind::suplinn:
      return 36.0 * scale * std::log2((8.0 * ab / p.eps + 7.0) * p.m * p.n * p.U);
    case CoverKind::suplin:
      return 64.0 * scale * std::log2((8.0 * ab / p.eps + 7.0) * p.m * p.n * p.U);
    case CoverKind::onestep:
      return 64.0 * scale / (p.rho * p.rho) *
             std::log2(8.0 * ab * p.n * p.m * p.O / (p.eps * p.rho) + 7.0 * p.O * p.m * p.n);
  }
  throw ValidationError("cover_size_bound: unknown kind");
}

std::uint64_t l1_lattice_size(Index d, Index k) {
  // sum_j 2^j C(d, j) C(k, j), in long double to detect saturation.
  long double total = 0.0L;
  long double cd = 1.0L, ck = 1.0L, pow2 = 1.0L;
  for (Index j = 0; j <= std::min(d, k); ++j) {
    if (j > 0) {
      cd = cd * static_cast<long double>(d - j + 1) / static_cast<long double>(j);
      ck = ck * static_cast<long double>(k - j + 1) / static_cast<long double>(j);
      pow2 *= 2.0L;
    }
    total += pow2 * cd * ck;
  }
  if (total >= 1.8e19L) return UINT64_MAX;
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(total)));
}

namespace {

void enumerate(Index d, Index budget, std::vector<Index>& z, Index pos,
               std::vector<std::vector<Index>>& out) {
  if (pos == d) {
    out.push_back(z);
    return;
  }
  for (Index v = -budget; v <= budget; ++v) {
    z[static_cast<std::size_t>(pos)] = v;
    enumerate(d, budget - std::abs(v), z, pos + 1, out);
  }
}

struct KeyHash {
  std::size_t operator()(const std::vector<Index>& z) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Index v : z) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

double nearest_brute(const Matrix& points, const Vector& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < points.rows(); ++r)
    best = std::min(best, (points.row(r).transpose() - x).squaredNorm());
  return std::sqrt(best);
}

}  // namespace

CoverCertificate l1_ball_cover(Index d, double beta, double eps, std::uint64_t size_cap) {
  require(d >= 1, "l1_ball_cover: dimension must be positive");
  require(beta > 0.0 && eps > 0.0, "l1_ball_cover: beta and eps must be positive");
  const double ratio = beta * beta / (eps * eps);
  // Guard against ratios such as 4.000000000000001 from rounding.
  const double k_real = std::ceil(ratio * (1.0 - 1e-12));
  require(k_real <= 1e9, "l1_ball_cover: beta/eps too large");
  const Index k = std::max<Index>(1, static_cast<Index>(k_real));
  const std::uint64_t size = l1_lattice_size(d, k);
  require(size <= size_cap, "l1_ball_cover: " + std::to_string(size) + " lattice points exceed the cap of " +
                                std::to_string(size_cap));
  std::vector<std::vector<Index>> lattice;
  lattice.reserve(static_cast<std::size_t>(size));
  std::vector<Index> z(static_cast<std::size_t>(d), 0);
  enumerate(d, k, z, 0, lattice);

  CoverCertificate cert;
  cert.d = d;
  cert.beta = beta;
  cert.eps = eps;
  cert.k = k;
  cert.claimed_log_size = static_cast<double>(k) * std::log(2.0 * static_cast<double>(d));
  cert.points.resize(static_cast<Index>(lattice.size()), d);
  for (std::size_t r = 0; r < lattice.size(); ++r)
    for (Index i = 0; i < d; ++i)
      cert.points(static_cast<Index>(r), i) =
          beta * static_cast<double>(lattice[r][static_cast<std::size_t>(i)]) / static_cast<double>(k);
  return cert;
}

Vector sample_l1_ball(Index d, double beta, std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_rng(seed, index);
  // d + 1 exponential spacings give a uniform point of the solid simplex.
  Vector e(d + 1);
  for (Index i = 0; i <= d; ++i) e[i] = standard_exponential(rng);
  const double total = e.sum();
  Vector x(d);
  for (Index i = 0; i < d; ++i) {
    const double sign = (rng() >> 63) ? -1.0 : 1.0;
    x[i] = sign * beta * e[i] / total;
  }
  return x;
}

CoverVerification cover_verify(const CoverCertificate& cert, std::uint64_t trials,
                               std::uint64_t seed) {
  require(trials >= 1, "cover_verify: need at least one trial");
  require(cert.d >= 1, "cover_verify: certificate has no dimension");
  CoverVerification out;
  out.trials = trials;
  if (cert.points.rows() == 0) {
    out.worst_distance = std::numeric_limits<double>::infinity();
    out.passed = false;
    return out;
  }
  require(cert.points.cols() == cert.d, "cover_verify: point dimension mismatch");

  std::unordered_set<std::vector<Index>, KeyHash> members;
  const bool lattice = cert.k > 0;
  if (lattice) {
    const double scale = static_cast<double>(cert.k) / cert.beta;
    std::vector<Index> key(static_cast<std::size_t>(cert.d));
    for (Index r = 0; r < cert.points.rows(); ++r) {
      for (Index i = 0; i < cert.d; ++i)
        key[static_cast<std::size_t>(i)] = static_cast<Index>(std::llround(cert.points(r, i) * scale));
      members.insert(key);
    }
  }

  const Index d = cert.d;
  std::vector<Index> key(static_cast<std::size_t>(d));
  for (std::uint64_t t = 0; t < trials; ++t) {
    const Vector x = sample_l1_ball(d, cert.beta, seed, t);
    double dist = std::numeric_limits<double>::infinity();
    if (lattice && d <= 20) {
      const double step = cert.beta / static_cast<double>(cert.k);
      const Vector q = x / step;
      for (std::uint64_t mask = 0; mask < (1ULL << d); ++mask) {
        for (Index i = 0; i < d; ++i)
          key[static_cast<std::size_t>(i)] = static_cast<Index>(std::floor(q[i])) + ((mask >> i) & 1ULL);
        if (!members.count(key)) continue;
        double sq = 0.0;
        for (Index i = 0; i < d; ++i) {
          const double diff = x[i] - step * static_cast<double>(key[static_cast<std::size_t>(i)]);
          sq += diff * diff;
        }
        dist = std::min(dist, std::sqrt(sq));
      }
    }
    if (!std::isfinite(dist)) dist = nearest_brute(cert.points, x);
    out.worst_distance = std::max(out.worst_distance, dist);
  }
  out.passed = out.worst_distance <= cert.eps;
  return out;
}

double grid_worst_distance(const CoverCertificate& cert, Index resolution) {
  require(cert.d >= 1 && cert.d <= 2, "grid_worst_distance: only d <= 2 is scanned exhaustively");
  require(resolution >= 1, "grid_worst_distance: resolution must be positive");
  if (cert.points.rows() == 0) return std::numeric_limits<double>::infinity();
  const double h = cert.beta / static_cast<double>(resolution);
  double worst = 0.0;
  if (cert.d == 1) {
    for (Index i = -resolution; i <= resolution; ++i) {
      Vector x(1);
      x[0] = h * static_cast<double>(i);
      worst = std::max(worst, nearest_brute(cert.points, x));
    }
    return worst;
  }
  for (Index i = -resolution; i <= resolution; ++i) {
    const Index rest = resolution - std::abs(i);
    for (Index j = -rest; j <= rest; ++j) {
      Vector x(2);
      x << h * static_cast<double>(i), h * static_cast<double>(j);
      worst = std::max(worst, nearest_brute(cert.points, x));
    }
  }
  return worst;
}

ChainingResult chaining_cardinality(const std::vector<double>& C, const std::vector<double>& a,
                                    const std::vector<double>& b_prev,
                                    const std::vector<double>& rho, double eps) {
  require(!C.empty() && C.size() == a.size() && a.size() == b_prev.size() && b_prev.size() == rho.size(),
          "chaining_cardinality: need one entry per layer in every list");
  require(eps > 0.0, "chaining_cardinality: eps must be positive");
  double sum_tight = 0.0, sum_sq = 0.0;
  for (std::size_t l = 0; l < C.size(); ++l) {
    require(C[l] >= 0 && a[l] >= 0 && b_prev[l] >= 0 && rho[l] >= 0,
            "chaining_cardinality: arguments must be nonnegative");
    const double t = std::sqrt(C[l]) * a[l] * b_prev[l] * rho[l];
    sum_tight += std::pow(t / eps, 2.0 / 3.0);
    sum_sq += t * t;
  }
  const double L = static_cast<double>(C.size());
  return {4.0 * std::pow(sum_tight, 3.0), 4.0 * L * L / (eps * eps) * sum_sq};
}

namespace {

struct Simpson {
  const LogCoverFn& g;
  std::uint64_t evals = 0;
  std::uint64_t max_evals;

  double f(double x) {
    if (++evals > max_evals) throw NumericalError("dudley_bound: evaluation budget exhausted");
    const double v = g(x);
    if (!std::isfinite(v) || v < 0.0)
      throw NumericalError("dudley_bound: log covering number is negative or non-finite at eps=" +
                           std::to_string(x));
    return std::sqrt(v);
  }

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                 int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           recurse(m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
  }
};

}  // namespace

double dudley_bound(const LogCoverFn& log_n, Index n, double alpha, double tol,
                    std::uint64_t max_evals) {
  require(n >= 1, "dudley_bound: n must be positive");
  require(alpha > 0.0 && alpha < 1.0, "dudley_bound: alpha must lie in (0, 1)");
  require(tol > 0.0, "dudley_bound: tolerance must be positive");
  Simpson s{log_n, 0, max_evals};
  const double fa = s.f(alpha), fb = s.f(1.0), fm = s.f(0.5 * (alpha + 1.0));
  const double whole = (1.0 - alpha) / 6.0 * (fa + 4.0 * fm + fb);
  const double integral = s.recurse(alpha, 1.0, fa, fm, fb, whole, tol, 50);
  return 4.0 * alpha + 12.0 / std::sqrt(static_cast<double>(n)) * integral;
}

}  // namespace cnnbound
