#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cgankd/subsample.hpp"

namespace cgankd {
namespace {

SynthConfig blobs(std::size_t n, std::uint64_t seed) {
  SynthConfig c;
  c.family = BlobsFamily{3, 3.0, 1.0};
  c.dim = 2;
  c.n = n;
  c.seed = seed;
  return c;
}

// A model whose classifier outputs sigmoid(z) for every input.
DensityRatioModel constant_model(double z) {
  const auto spec = nn::NetSpec::linear(2 + 3, {2}, 1);
  DensityRatioModel m{nn::zeros_like(spec), Task::classification(3), 2, 1.0, 1.0};
  m.net.layers.back().bias[0] = z;
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

TEST(Ratio, OddsIdentity) {
  const Sample s{{0.3, -1.0}, ClassIndex{1}, Provenance::fake_raw};
  EXPECT_DOUBLE_EQ(ratio(constant_model(0.0), s), 1.0);
  EXPECT_NEAR(ratio(constant_model(std::log(4.0)), s), 4.0, 1e-12);
  auto m = constant_model(0.0);
  m.prior_correction = 2.5;
  EXPECT_DOUBLE_EQ(ratio(m, s), 2.5);
}

TEST(Ratio, FiniteAtSaturation) {
  const Sample s{{0.0, 0.0}, ClassIndex{0}, Provenance::fake_raw};
  EXPECT_TRUE(std::isfinite(ratio(constant_model(1e6), s)));
  EXPECT_GT(ratio(constant_model(-1e6), s), 0.0);
}

TEST(TrainDr, IdenticalDistributionsGiveUnitRatios) {
  const auto real = make_dataset(blobs(600, 1));
  const auto fake = make_dataset(blobs(1200, 2)).with_provenance(Provenance::fake_raw);
  SubsampleConfig cfg;
  cfg.seed = 3;
  const auto m = train_dr(real, fake, cfg);
  std::vector<double> r;
  for (const auto& s : make_dataset(blobs(500, 4))) r.push_back(ratio(m, s));
  const double med = median(r);
  EXPECT_GE(med, 0.5);
  EXPECT_LE(med, 2.0);
}

TEST(TrainDr, JunkGetsLowRatios) {
  const auto base = blobs(600, 5);
  const auto real = make_dataset(base);
  const auto oracle = std::get<CorruptedOracle>(make_oracle(base, 0.0, 0.3, 6.0));
  const auto draws = sample_with_truth(oracle, balanced_class_labels(3, 2000), 6);
  Dataset fake(real.task(), real.dim());
  for (const auto& d : draws) fake.add(d.sample);
  SubsampleConfig cfg;
  cfg.seed = 7;
  const auto m = train_dr(real, fake, cfg);
  const auto held = sample_with_truth(oracle, balanced_class_labels(3, 2000), 8);
  std::vector<double> clean, junk;
  for (const auto& d : held) (d.junk ? junk : clean).push_back(ratio(m, d.sample));
  std::sort(clean.begin(), clean.end());
  const double p10 = clean[clean.size() / 10];
  const auto below = std::count_if(junk.begin(), junk.end(), [&](double r) { return r < p10; });
  EXPECT_GE(static_cast<double>(below), 0.9 * static_cast<double>(junk.size()));
}

TEST(TrainDr, DeterministicAndSerializable) {
  const auto real = make_dataset(blobs(200, 1));
  const auto fake = make_dataset(blobs(300, 2));
  SubsampleConfig cfg;
  cfg.dr.epochs = 3;
  cfg.seed = 9;
  const auto a = train_dr(real, fake, cfg), b = train_dr(real, fake, cfg);
  EXPECT_EQ(a.net, b.net);
  EXPECT_EQ(a.ceiling, b.ceiling);
  std::stringstream ss;
  write_dr_model(a, ss);
  const auto c = read_dr_model(ss);
  EXPECT_EQ(c.net, a.net);
  EXPECT_EQ(c.ceiling, a.ceiling);
  EXPECT_EQ(c.prior_correction, a.prior_correction);
}

TEST(TrainDr, RejectsBadInputs) {
  const auto real = make_dataset(blobs(50, 1));
  SubsampleConfig cfg;
  EXPECT_THROW(train_dr(real, Dataset(real.task(), 2), cfg), std::invalid_argument);
  cfg.gamma = 0.9;
  EXPECT_THROW(train_dr(real, real, cfg), std::invalid_argument);
}

// Exact-ratio rejection sampling on a finite space with generator g and target r.
double discrete_tv(const std::vector<double>& g, const std::vector<double>& r, std::size_t accepts, std::uint64_t seed) {
  const std::size_t k = g.size();
  double mmax = 0;
  for (std::size_t i = 0; i < k; ++i) mmax = std::max(mmax, r[i] / g[i]);
  auto draw = [&](const Label&, Rng& rng) {
    double u = rng.uniform(), acc = 0;
    for (std::size_t i = 0; i + 1 < k; ++i)
      if (u < (acc += g[i])) return i;
    return k - 1;
  };
  const auto out = rejection_sample_draws<std::size_t>(draw, [&](std::size_t i) { return r[i] / g[i]; }, mmax,
                                                       std::vector<Label>(accepts, ClassIndex{0}), seed);
  std::vector<double> emp(k, 0.0);
  for (auto i : out) emp[i] += 1.0 / static_cast<double>(accepts);
  double tv = 0;
  for (std::size_t i = 0; i < k; ++i) tv += 0.5 * std::abs(emp[i] - r[i]);
  return tv;
}

TEST(Rejection, TwoPointToyRecoversTarget) {
  EXPECT_LT(discrete_tv({0.5, 0.5}, {0.9, 0.1}, 50000, 13), 0.02);
}

// Property: random finite spaces with full-support generators.
TEST(Rejection, RandomFiniteSpacesRecoverTarget) {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<double> g(k), r(k);
    double sg = 0, sr = 0;
    for (std::size_t i = 0; i < k; ++i) sg += g[i] = 0.2 + rng.uniform(), sr += r[i] = rng.uniform();
    for (std::size_t i = 0; i < k; ++i) g[i] /= sg, r[i] /= sr;
    EXPECT_LT(discrete_tv(g, r, 50000, rng.next_u64()), 0.02) << "trial " << trial;
  }
}

TEST(Rejection, ConstantRatioAcceptsEveryProposal) {
  const auto oracle = make_oracle(blobs(10, 1), 0.2, 0.1, 5.0);
  const auto m = constant_model(0.0);  // ratio 1 everywhere, ceiling 1
  const auto labels = balanced_class_labels(3, 300);
  RejectionStats stats;
  const auto out = rejection_sample(oracle, m, labels, 17, &stats);
  EXPECT_EQ(stats.proposals, 300u);
  EXPECT_EQ(stats.accepted, 300u);
  const auto raw = sample(oracle, labels, 17);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].features, raw[i].features);
}

TEST(Rejection, ExactCountAndProvenance) {
  const auto oracle = make_oracle(blobs(10, 1), 0.0, 0.0, 5.0);
  auto m = constant_model(0.0);
  m.ceiling = 4.0;  // acceptance 1/4
  const auto labels = balanced_class_labels(3, 123);
  RejectionStats stats;
  const auto out = rejection_sample(oracle, m, labels, 3, &stats);
  ASSERT_EQ(out.size(), 123u);
  EXPECT_GT(stats.proposals, 123u);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].provenance, Provenance::fake_m1);
    EXPECT_EQ(out[i].label, labels[i]);
  }
}

TEST(Rejection, CollapseAborts) {
  const auto oracle = make_oracle(blobs(10, 1), 0.0, 0.0, 5.0);
  auto m = constant_model(-1e6);
  m.ceiling = 1.0;
  EXPECT_THROW(rejection_sample(oracle, m, balanced_class_labels(3, 5), 1), NumericError);
}

TEST(Rejection, AcceptanceIsAPureFunctionOfTheDraw) {
  const auto oracle = make_oracle(blobs(10, 1), 0.2, 0.2, 5.0);
  auto m = constant_model(0.0);
  m.ceiling = 3.0;
  const auto labels = balanced_class_labels(3, 40);
  EXPECT_EQ(rejection_sample(oracle, m, labels, 5), rejection_sample(oracle, m, labels, 5));
}

TEST(Rejection, TrainedRatiosReduceJunk) {
  double raw_junk = 0, kept_junk = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto base = blobs(400, seed);
    const auto real = make_dataset(base);
    const auto oracle = std::get<CorruptedOracle>(make_oracle(base, 0.0, 0.3, 6.0));
    Dataset fake(real.task(), real.dim());
    for (const auto& d : sample_with_truth(oracle, balanced_class_labels(3, 1000), derive_seed(seed, "fit")))
      fake.add(d.sample);
    SubsampleConfig cfg;
    cfg.dr.epochs = 20;
    cfg.seed = seed;
    const auto m = train_dr(real, fake, cfg);
    const auto labels = balanced_class_labels(3, 600);
    for (const auto& d : sample_with_truth(oracle, labels, derive_seed(seed, "raw"))) raw_junk += d.junk;
    for (const auto& d : rejection_sample_oracle(oracle, m, labels, derive_seed(seed, "m1"))) kept_junk += d.junk;
  }
  EXPECT_LT(kept_junk, raw_junk);
  EXPECT_LT(kept_junk / (5 * 600), 0.1);
}

}  // namespace
}  // namespace cgankd
