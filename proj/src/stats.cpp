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

#include "cnnbound/stats.hpp"

#include <algorithm>
#include <cmath>

#include "cnnbound/error.hpp"
#include "cnnbound/random.hpp"

namespace cnnbound {

using detail::require;

Histogram histogram(const std::vector<double>& values, Index bins) {
  require(!values.empty(), "histogram: no values");
  require(bins >= 1, "histogram: need at least one bin");
  for (double v : values) require(std::isfinite(v), "histogram: non-finite value");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Histogram h;
  h.lo = *lo;
  h.hi = *hi;
  h.count.assign(static_cast<std::size_t>(bins), 0);
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (Index b = 0; b < bins; ++b) h.left.push_back(h.lo + width * static_cast<double>(b));
  for (double v : values) {
    Index b = width > 0.0 ? static_cast<Index>(std::floor((v - h.lo) / width)) : 0;
    b = std::clamp<Index>(b, 0, bins - 1);
    ++h.count[static_cast<std::size_t>(b)];
  }
  return h;
}

double dip_statistic(std::vector<double> values) {
  require(!values.empty(), "dip_statistic: no values");
  std::sort(values.begin(), values.end());
  const Index n = static_cast<Index>(values.size());
  if (n < 2 || values.front() == values.back()) return 0.0;

  // 1-based indexing over the sorted sample.
  std::vector<double> x(static_cast<std::size_t>(n + 1));
  std::copy(values.begin(), values.end(), x.begin() + 1);
  std::vector<Index> mn(static_cast<std::size_t>(n + 1)), mj(static_cast<std::size_t>(n + 1));
  std::vector<Index> gcm(static_cast<std::size_t>(n + 1)), lcm(static_cast<std::size_t>(n + 1));
  auto X = [&](Index i) { return x[static_cast<std::size_t>(i)]; };

  // Greatest convex minorant and least concave majorant: for every point the
  // index of its predecessor (successor) on the hull of the prefix (suffix).
  mn[1] = 1;
  for (Index j = 2; j <= n; ++j) {
    mn[static_cast<std::size_t>(j)] = j - 1;
    for (;;) {
      const Index a = mn[static_cast<std::size_t>(j)];
      const Index b = mn[static_cast<std::size_t>(a)];
      if (a == 1 || (X(j) - X(a)) * static_cast<double>(a - b) < (X(a) - X(b)) * static_cast<double>(j - a)) break;
      mn[static_cast<std::size_t>(j)] = b;
    }
  }
  mj[static_cast<std::size_t>(n)] = n;
  for (Index k = n - 1; k >= 1; --k) {
    mj[static_cast<std::size_t>(k)] = k + 1;
    for (;;) {
      const Index a = mj[static_cast<std::size_t>(k)];
      const Index b = mj[static_cast<std::size_t>(a)];
      if (a == n || (X(k) - X(a)) * static_cast<double>(a - b) < (X(a) - X(b)) * static_cast<double>(k - a)) break;
      mj[static_cast<std::size_t>(k)] = b;
    }
  }

  // Distances are tracked in units of 1/n, doubled at the end.
  double dip = 1.0;
  Index low = 1, high = n;
  for (;;) {
    Index i = 1;
    gcm[1] = high;
    while (gcm[static_cast<std::size_t>(i)] > low) {
      gcm[static_cast<std::size_t>(i + 1)] = mn[static_cast<std::size_t>(gcm[static_cast<std::size_t>(i)])];
      ++i;
    }
    const Index l_gcm = i;
    Index ig = l_gcm, ix = l_gcm - 1;
    i = 1;
    lcm[1] = low;
    while (lcm[static_cast<std::size_t>(i)] < high) {
      lcm[static_cast<std::size_t>(i + 1)] = mj[static_cast<std::size_t>(lcm[static_cast<std::size_t>(i)])];
      ++i;
    }
    const Index l_lcm = i;
    Index ih = l_lcm, iv = 2;
    auto G = [&](Index t) { return gcm[static_cast<std::size_t>(t)]; };
    auto H = [&](Index t) { return lcm[static_cast<std::size_t>(t)]; };

    // Largest vertical distance between the two hulls, and where it occurs.
    double d = 0.0;
    if (l_gcm != 2 || l_lcm != 2) {
      do {
        const Index gx = G(ix), lv = H(iv);
        if (gx > lv) {
          const Index g1 = G(ix + 1);
          const double dx = static_cast<double>(lv - g1 + 1) -
                            (X(lv) - X(g1)) * static_cast<double>(gx - g1) / (X(gx) - X(g1));
          ++iv;
          if (dx >= d) {
            d = dx;
            ig = ix + 1;
            ih = iv - 1;
          }
        } else {
          const Index l1 = H(iv - 1);
          const double dx = (X(gx) - X(l1)) * static_cast<double>(lv - l1) / (X(lv) - X(l1)) -
                            static_cast<double>(gx - l1 - 1);
          --ix;
          if (dx >= d) {
            d = dx;
            ig = ix + 1;
            ih = iv;
          }
        }
        ix = std::max<Index>(ix, 1);
        iv = std::min(iv, l_lcm);
      } while (G(ix) != H(iv));
    } else {
      d = 1.0;
    }
    if (d < dip) break;

    // Dip of the convex and concave pieces outside the modal interval.
    double dip_l = 0.0;
    for (Index j = ig; j < l_gcm; ++j) {
      double max_t = 1.0;
      const Index jb = G(j + 1), je = G(j);
      if (je - jb > 1 && X(je) != X(jb)) {
        const double c = static_cast<double>(je - jb) / (X(je) - X(jb));
        for (Index jj = jb; jj <= je; ++jj)
          max_t = std::max(max_t, static_cast<double>(jj - jb + 1) - (X(jj) - X(jb)) * c);
      }
      dip_l = std::max(dip_l, max_t);
    }
    double dip_u = 0.0;
    for (Index j = ih; j < l_lcm; ++j) {
      double max_t = 1.0;
      const Index jb = H(j), je = H(j + 1);
      if (je - jb > 1 && X(je) != X(jb)) {
        const double c = static_cast<double>(je - jb) / (X(je) - X(jb));
        for (Index jj = jb; jj <= je; ++jj)
          max_t = std::max(max_t, (X(jj) - X(jb)) * c - static_cast<double>(jj - jb - 1));
      }
      dip_u = std::max(dip_u, max_t);
    }
    dip = std::max({dip, dip_l, dip_u});
    if (low == G(ig) && high == H(ih)) break;
    low = G(ig);
    high = H(ih);
  }
  return dip / (2.0 * static_cast<double>(n));
}

double dip_p_value(double dip, Index n, Index reps, std::uint64_t seed) {
  require(n >= 1 && reps >= 1, "dip_p_value: need n >= 1 and reps >= 1");
  Index at_least = 0;
  std::vector<double> sample(static_cast<std::size_t>(n));
  for (Index r = 0; r < reps; ++r) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(r));
    for (double& v : sample) v = uniform01(rng);
    if (dip_statistic(sample) >= dip) ++at_least;
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(reps + 1);
}

Index histogram_modes(const Histogram& h, double min_share) {
  const auto bins = static_cast<Index>(h.count.size());
  double total = 0.0;
  for (Index c : h.count) total += static_cast<double>(c);
  if (bins == 0 || total == 0.0) return 0;
  // Gaussian smoothing, sd 1.5 bins.
  constexpr Index radius = 4;
  constexpr double sd = 1.5;
  std::vector<double> smooth(static_cast<std::size_t>(bins), 0.0);
  for (Index b = 0; b < bins; ++b) {
    double s = 0.0, k = 0.0;
    for (Index t = std::max<Index>(0, b - radius); t <= std::min(bins - 1, b + radius); ++t) {
      const double w = std::exp(-0.5 * static_cast<double>((t - b) * (t - b)) / (sd * sd));
      s += w * static_cast<double>(h.count[static_cast<std::size_t>(t)]);
      k += w;
    }
    smooth[static_cast<std::size_t>(b)] = s / k;
  }
  // A peak counts when its prominence exceeds both min_share of the sample
  // and twice the Poisson noise of its height. Prominence is measured down to
  // the higher of the two lowest points separating the peak from taller
  // ground; sides that never reach taller ground do not constrain it.
  auto walk = [&](Index from, Index step, double v, bool& taller) {
    double low = v;
    taller = false;
    for (Index t = from; t >= 0 && t < bins; t += step) {
      const double x = smooth[static_cast<std::size_t>(t)];
      if (x > v) {
        taller = true;
        break;
      }
      low = std::min(low, x);
    }
    return low;
  };
  Index modes = 0;
  for (Index b = 0; b < bins; ++b) {
    const double v = smooth[static_cast<std::size_t>(b)];
    Index e = b;
    while (e + 1 < bins && smooth[static_cast<std::size_t>(e + 1)] == v) ++e;
    const bool left = b == 0 || smooth[static_cast<std::size_t>(b - 1)] < v;
    const bool right = e == bins - 1 || smooth[static_cast<std::size_t>(e + 1)] < v;
    if (left && right) {
      bool taller_left = false, taller_right = false;
      const double low_left = walk(b - 1, -1, v, taller_left);
      const double low_right = walk(e + 1, 1, v, taller_right);
      double base = std::min(low_left, low_right);
      if (taller_left && taller_right) base = std::max(low_left, low_right);
      else if (taller_left) base = low_left;
      else if (taller_right) base = low_right;
      if (v - base >= std::max(min_share * total, 2.0 * std::sqrt(v))) ++modes;
    }
    b = e;
  }
  return modes;
}

ModeReport assess_modes(const std::vector<double>& values, double level, Index reps, std::uint64_t seed) {
  require(level > 0.0 && level < 1.0, "assess_modes: level must lie in (0, 1)");
  ModeReport r;
  r.dip = dip_statistic(values);
  r.p_value = dip_p_value(r.dip, static_cast<Index>(values.size()), reps, seed);
  r.multimodal = r.p_value < level;
  r.histogram_modes = histogram_modes(histogram(values));
  return r;
}

}  // namespace cnnbound
