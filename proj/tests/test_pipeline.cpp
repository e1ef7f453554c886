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

#include <gtest/gtest.h>

#include "cnnbound/pipeline.hpp"

namespace cnnbound {
namespace {

TEST(RunSpec, JsonRoundTrip) {
  RunSpec s;
  s.command = "compare";
  s.seed = 42;
  s.gamma = 0.5;
  s.variants = {"main", "augmented"};
  s.train.learning_rate = 0.003;
  const RunSpec r = RunSpec::from_json(s.to_json());
  EXPECT_EQ(r.to_json(), s.to_json());
  EXPECT_EQ(r.seed, 42u);
  ASSERT_TRUE(r.gamma.has_value());
  EXPECT_DOUBLE_EQ(*r.gamma, 0.5);
  EXPECT_DOUBLE_EQ(r.train.learning_rate, 0.003);
}

TEST(RunSpec, Validation) {
  RunSpec s;
  s.command = "gen-data";
  EXPECT_NO_THROW(s.validate());
  RunSpec bad = s;
  bad.n = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = s;
  bad.preset = "resnet";
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = s;
  bad.command = "plot";
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = s;
  bad.delta = 1.5;
  EXPECT_THROW(bad.validate(), ValidationError);
  EXPECT_EQ(s.effective_iter(), 1);
  s.len = 4000;
  EXPECT_EQ(s.effective_iter(), 4);
}

TEST(Presets, Shapes) {
  const Architecture syn = synthetic2(1000);
  EXPECT_EQ(syn.depth(), 2);
  EXPECT_EQ(syn.layer(1).patch_count(), 1000 - kSyntheticFilterWidth + 1);
  EXPECT_EQ(syn.layer(1).filters, kSyntheticFilters);
  EXPECT_EQ(syn.param_count(), kSyntheticFilters * kDigits * kSyntheticFilterWidth + 2 * kSyntheticFilters);
  const Architecture m = mnist4(56);
  EXPECT_EQ(m.depth(), 5);
  EXPECT_EQ(m.class_count(), 10);
  EXPECT_EQ(m.layer(1).filters, 64);
}

TEST(Analyze, UntrainedNetworkHasZeroDistanceCapacities) {
  const SignatureDataset d = gen_signature_dataset(1, 40, 100, 1);
  const Architecture arch = synthetic2(100);
  const WeightSet w = glorot_uniform(arch, 2);
  AnalysisOptions opt;
  opt.gamma = 0.01;
  opt.preset = "synthetic2";
  opt.dip_reps = 50;
  const Analysis a = analyze(arch, d.data, w, w, opt);
  int zero_rows = 0;
  for (const auto& r : a.rows) {
    if (r.status != "ok") continue;
    if (r.distance_based) {
      EXPECT_EQ(r.R, 0.0) << r.name;
      EXPECT_EQ(r.capacity, 0.0) << r.name;
      ++zero_rows;
    }
  }
  EXPECT_GE(zero_rows, 4);
  EXPECT_GT(a.row("params").R, 0.0);
  EXPECT_THROW(a.row("nonexistent"), ValidationError);
}

TEST(Analyze, AutoMarginAndTables) {
  const SignatureDataset d = gen_signature_dataset(3, 60, 100, 1);
  const Architecture arch = synthetic2(100);
  const WeightSet refs = glorot_uniform(arch, 5);
  WeightSet w = refs;
  w.layer(2) *= 3.0;
  AnalysisOptions opt;
  opt.auto_margin = 0.5;
  opt.dip_reps = 50;
  const Analysis a = analyze(arch, d.data, w, refs, opt);
  EXPECT_GT(a.gamma, 0.0);
  EXPECT_EQ(a.n, 60);
  EXPECT_EQ(a.norms.size(), 2u);
  EXPECT_EQ(a.stats.size(), 3u);
  EXPECT_GT(a.row("main").R, 0.0);
  EXPECT_NEAR(capacity_ratio(a, "main"), a.row("spectral_margin").capacity / a.row("main").capacity, 1e-12);
}

TEST(Downsample, CaseInvariants) {
  for (std::uint64_t i = 0; i < 5; ++i) {
    const DownsampleCase c = downsample_case(7, i);
    EXPECT_NEAR(c.b0_original, c.b0_downsampled, 1e-12);
    ASSERT_EQ(c.a1_original.size(), c.a1_downsampled.size());
    for (std::size_t f = 0; f < c.a1_original.size(); ++f) EXPECT_NEAR(c.a1_original[f], c.a1_downsampled[f], 1e-12);
    EXPECT_NE(c.params_bound_original, c.params_bound_downsampled);
  }
}

}  // namespace
}  // namespace cnnbound
