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

#ifndef CNNBOUND_STATS_HPP
#define CNNBOUND_STATS_HPP

#include <cstdint>
#include <vector>

#include "cnnbound/linalg.hpp"

namespace cnnbound {

inline constexpr Index kHistogramBins = 50;

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> left;  ///< left edge of each bin
  std::vector<Index> count;
};

/// Equal-width bins over [min, max] of the values; the last bin is closed.
Histogram histogram(const std::vector<double>& values, Index bins = kHistogramBins);

/// Hartigan's dip statistic of the empirical distribution.
double dip_statistic(std::vector<double> values);

/// Monte Carlo p-value of the dip against the uniform null:
/// (1 + #{dip_ref >= dip}) / (reps + 1).
double dip_p_value(double dip, Index n, Index reps, std::uint64_t seed);

/// Peaks of the Gaussian-smoothed histogram (sd 1.5 bins) whose prominence
/// is at least min_share of the sample and twice the square root of their
/// height.
Index histogram_modes(const Histogram& h, double min_share = 0.02);

struct ModeReport {
  double dip = 0.0;
  double p_value = 1.0;
  bool multimodal = false;  ///< unimodality rejected at the given level
  Index histogram_modes = 0;
};

ModeReport assess_modes(const std::vector<double>& values, double level = 0.05, Index reps = 2000,
                        std::uint64_t seed = 0);

}  // namespace cnnbound

#endif  // CNNBOUND_STATS_HPP
