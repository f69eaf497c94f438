#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cgankd/cgen.hpp"
#include "cgankd/label_adjust.hpp"

namespace cgankd {
namespace {

// Classifier whose logits equal its (nonnegative) input features.
nn::NetParams identity_classifier(std::size_t c) {
  auto p = nn::zeros_like(nn::NetSpec::classifier(c, {c}, c));
  for (std::size_t i = 0; i < c; ++i) p.layers[0].w(i, i) = p.layers[1].w(i, i) = 1.0;
  return p;
}

// Regressor that predicts its (nonnegative) scalar input.
nn::NetParams identity_regressor() {
  auto p = nn::zeros_like(nn::NetSpec::regressor(1, {1}));
  p.layers[0].weight[0] = p.layers[1].weight[0] = 1.0;
  return p;
}

// Class-c sample whose teacher logit for c is t and 0 elsewhere.
Sample scored(int c, std::size_t classes, double t, Provenance p = Provenance::fake_m1) {
  std::vector<double> x(classes, 0.0);
  x[static_cast<std::size_t>(c)] = t;
  return {x, ClassIndex{c}, p};
}

Dataset regression_set(const std::vector<std::pair<double, double>>& pred_and_label) {
  Dataset ds(Task::regression(0, 100), 1);
  for (auto [x, y] : pred_and_label) ds.add({{x}, ScalarLabel{y}, Provenance::fake_m1});
  return ds;
}

TEST(SampleErrors, HandValues) {
  const auto t = identity_classifier(4);
  Dataset ds(Task::classification(4), 4);
  ds.add(scored(2, 4, 800.0));
  ds.add({{1, 1, 1, 1}, ClassIndex{3}, Provenance::fake_m1});
  const auto e = sample_errors(t, ds);
  EXPECT_EQ(e[0], 0.0);
  EXPECT_NEAR(e[1], std::log(4.0), 1e-15);
  EXPECT_NEAR(sample_errors(identity_regressor(), regression_set({{0.7, 0.4}}))[0], 0.3, 1e-15);
}

TEST(Quantile, NearestRank) {
  std::vector<double> e;
  for (int i = 10; i >= 1; --i) e.push_back(i);
  const double a = quantile_threshold(e, 0.7);
  EXPECT_EQ(a, 7.0);
  EXPECT_EQ(std::count_if(e.begin(), e.end(), [&](double v) { return v <= a; }), 7);
  EXPECT_EQ(quantile_threshold(e, 1.0), 10.0);
  EXPECT_EQ(quantile_threshold(e, 0.0), -INFINITY);
  EXPECT_EQ(quantile_threshold(e, 0.01), 1.0);
  EXPECT_THROW(quantile_threshold({}, 0.5), std::invalid_argument);
  EXPECT_THROW(quantile_threshold(e, 1.5), std::invalid_argument);
}

TEST(Quantile, RankArithmetic) {
  EXPECT_EQ(nearest_rank(0.7, 10), 7u);
  EXPECT_EQ(nearest_rank(0.9, 500), 450u);
  EXPECT_EQ(nearest_rank(0.7, 100000), 70000u);
  EXPECT_EQ(nearest_rank(0.71, 10), 8u);
  EXPECT_EQ(nearest_rank(0.3, 997), 300u);
  EXPECT_EQ(nearest_rank(1.0, 3), 3u);
}

// Property: for distinct errors the kept count is ceil(rho n) and kept sets nest.
TEST(Quantile, ExactCountsAndNesting) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<double> e(n);
    for (auto& v : e) v = rng.normal();
    const double r1 = rng.uniform(), r2 = r1 + (1 - r1) * rng.uniform();
    const double a1 = quantile_threshold(e, r1), a2 = quantile_threshold(e, r2);
    std::size_t k1 = 0;
    for (double v : e) {
      k1 += v <= a1;
      if (v <= a1) {
        EXPECT_LE(v, a2);
      }
    }
    // Independent oracle: smallest k with k >= rho n, up to float snapping.
    std::size_t want = 0;
    while (static_cast<double>(want) < r1 * static_cast<double>(n) - 1e-9) ++want;
    EXPECT_EQ(k1, std::max<std::size_t>(want, r1 > 0 ? 1 : 0));
  }
}

TEST(FilterClassification, KeepsNinetyPercentPerClass) {
  const auto t = identity_classifier(3);
  Dataset ds(Task::classification(3), 3);
  for (int i = 0; i < 500; ++i)
    for (int c = 0; c < 3; ++c) ds.add(scored(c, 3, 0.01 * i + 0.001 * c));
  const auto r = filter_classification(t, ds, 0.9);
  EXPECT_EQ(r.report.counts_out, (std::vector<std::size_t>{450, 450, 450}));
  EXPECT_EQ(r.kept.size(), 1350u);
  for (const auto& s : r.kept) EXPECT_EQ(s.provenance, Provenance::fake_m2);
}

TEST(FilterClassification, RhoOneKeepsEverythingUnchanged) {
  const auto t = identity_classifier(3);
  Dataset ds(Task::classification(3), 3);
  Rng rng(1);
  for (int i = 0; i < 60; ++i) ds.add(scored(i % 3, 3, rng.uniform(0, 5)));
  const auto r = filter_classification(t, ds, 1.0);
  ASSERT_EQ(r.kept.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(r.kept[i].features, ds[i].features);
    EXPECT_EQ(r.kept[i].label, ds[i].label);
  }
  EXPECT_TRUE(filter_classification(t, ds, 0.0).kept.empty());
  EXPECT_FALSE(filter_classification(t, ds, 0.0).report.consistency_after);
}

TEST(FilterClassification, AbsentClassThrows) {
  Dataset ds(Task::classification(3), 3);
  ds.add(scored(0, 3, 1.0));
  ds.add(scored(1, 3, 1.0));
  EXPECT_THROW(filter_classification(identity_classifier(3), ds, 0.5), std::invalid_argument);
}

// Flip-corrupted oracle scored by an exact nearest-mean teacher.
TEST(FilterClassification, ConsistencyIncreasesOnFlippedLabels) {
  double before = 0, after = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig base;
    base.family = BlobsFamily{4, 6.0, 1.0};
    base.n = 10;
    const auto oracle = make_oracle(base, 0.2, 0.0, 5.0);
    const auto fakes = sample(oracle, balanced_class_labels(4, 2000), seed);
    // Logit_c = <mu_c, x> via relu(x) - relu(-x). Every mean lies on one
    // circle, so this ranks classes exactly like the nearest mean.
    auto t = nn::zeros_like(nn::NetSpec::classifier(2, {4}, 4));
    t.layers[0].w(0, 0) = 1, t.layers[0].w(1, 1) = 1, t.layers[0].w(2, 0) = -1, t.layers[0].w(3, 1) = -1;
    const auto& fam = std::get<BlobsFamily>(base.family);
    for (int c = 0; c < 4; ++c) {
      const auto mu = fam.mean(c, 2);
      // Scaled down so flipped samples stay off the probability floor.
      t.layers[1].w(c, 0) = 0.1 * mu[0], t.layers[1].w(c, 1) = 0.1 * mu[1];
      t.layers[1].w(c, 2) = -0.1 * mu[0], t.layers[1].w(c, 3) = -0.1 * mu[1];
    }
    const auto r = filter_classification(t, fakes, 0.9);
    before += *r.report.consistency_before;
    after += *r.report.consistency_after;
  }
  EXPECT_GT(after, before);
  EXPECT_NEAR(before / 5, 0.8, 0.05);
}

TEST(FilterRegression, GlobalThresholdCount) {
  std::vector<std::pair<double, double>> v;
  for (int i = 0; i < 1000; ++i) v.push_back({0.5 + 0.0004 * i, 0.5});
  const auto r = filter_regression(identity_regressor(), regression_set(v), 0.7);
  EXPECT_EQ(r.kept.size(), 700u);
  EXPECT_EQ(r.report.thresholds.size(), 1u);
  EXPECT_FALSE(r.report.consistency_before);
}

TEST(FilterRegression, TiesKeepEverything) {
  std::vector<std::pair<double, double>> v(50, {0.6, 0.4});
  for (double rho : {0.01, 0.3, 1.0}) EXPECT_EQ(filter_regression(identity_regressor(), regression_set(v), rho).kept.size(), 50u);
  EXPECT_EQ(filter_regression(identity_regressor(), regression_set(v), 0.0).kept.size(), 0u);
}

TEST(FilterRegression, JunkFractionDrops) {
  SynthConfig base;
  base.family = RingFamily{1.0, 1.0, 0.02, 0.0, 100.0};
  base.n = 10;
  const auto oracle = std::get<CorruptedOracle>(make_oracle(base, 0.0, 0.3, 4.0));
  std::vector<Label> labels;
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) labels.push_back(ScalarLabel{rng.uniform()});
  const auto draws = sample_with_truth(oracle, labels, 3);
  // The exact inverse curve stands in for the teacher: its prediction is the
  // single feature and the identity regressor reads it back.
  const auto& fam = std::get<RingFamily>(base.family);
  Dataset ds(Task::regression(0, 100), 1);
  std::size_t junk_in = 0;
  std::vector<bool> is_junk;
  for (const auto& d : draws) {
    ds.add({{fam.true_label(d.sample.features)}, d.sample.label, Provenance::fake_m1});
    junk_in += d.junk;
    is_junk.push_back(d.junk);
  }
  const auto r = filter_regression(identity_regressor(), ds, 0.7);
  std::size_t junk_out = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) junk_out += r.mask[i] && is_junk[i];
  EXPECT_LT(static_cast<double>(junk_out) / r.kept.size(), static_cast<double>(junk_in) / ds.size());
}

TEST(Replace, UsesTeacherPrediction) {
  const auto out = replace_labels(identity_regressor(), regression_set({{0.55, 0.40}, {1.7, 0.2}}));
  EXPECT_DOUBLE_EQ(value_of(out[0].label), 0.55);
  EXPECT_DOUBLE_EQ(value_of(out[1].label), 1.0);
  EXPECT_EQ(out[0].features, (std::vector<double>{0.55}));
}

TEST(Replace, FixedPointAndIdempotence) {
  Rng rng(6);
  std::vector<std::pair<double, double>> v;
  for (int i = 0; i < 100; ++i) v.push_back({rng.uniform(), rng.uniform()});
  const auto t = identity_regressor();
  const auto once = replace_labels(t, regression_set(v));
  EXPECT_EQ(replace_labels(t, once), once);
  for (double e : sample_errors(t, once)) EXPECT_EQ(e, 0.0);
  EXPECT_THROW(replace_labels(t, Dataset(Task::classification(2), 1)), std::invalid_argument);
}

TEST(RunM2, Composition) {
  const auto t = identity_regressor();
  std::vector<std::pair<double, double>> v;
  for (int i = 0; i < 10; ++i) v.push_back({0.5, 0.5 - 0.01 * i});
  const auto ds = regression_set(v);
  const auto full = run_m2(t, ds, 0.7);
  EXPECT_EQ(full.processed.size(), 7u);
  for (const auto& s : full.processed) EXPECT_DOUBLE_EQ(value_of(s.label), 0.5);
  const auto no_replace = run_m2(t, ds, 0.7, true, false);
  EXPECT_EQ(no_replace.processed, filter_regression(t, ds, 0.7).kept);
  const auto no_filter = run_m2(t, ds, 0.7, false, false);
  EXPECT_EQ(no_filter.processed.size(), 10u);
  EXPECT_EQ(no_filter.report.rho, 0.7);
  EXPECT_TRUE(run_m2(t, Dataset(ds.task(), 1), 0.7).processed.empty());
}

TEST(FilterReport, KeyValueDump) {
  const auto t = identity_classifier(2);
  Dataset ds(Task::classification(2), 2);
  for (int i = 0; i < 4; ++i) ds.add(scored(i % 2, 2, i + 1.0));
  const auto kv = filter_classification(t, ds, 0.5).report.to_kv();
  EXPECT_NE(kv.find("rho=0.5\n"), std::string::npos);
  EXPECT_NE(kv.find("count_out.0=1\n"), std::string::npos);
  EXPECT_NE(kv.find("total_out=2\n"), std::string::npos);
}

}  // namespace
}  // namespace cgankd
