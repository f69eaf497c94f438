#include <gtest/gtest.h>

#include "cgankd/distill.hpp"

namespace cgankd {
namespace {

PipelineConfig small_config(bool classification, std::uint64_t seed = 1) {
  PipelineConfig c;
  if (classification) {
    c.data.family = BlobsFamily{3, 3.0, 1.0};
    c.generator.label_noise = 0.2;
    c.rho = 0.9;
  } else {
    c.data.family = RingFamily{1.0, 1.0, 0.05, 0.0, 100.0};
    c.generator.label_noise = 0.05;
    c.rho = 0.7;
  }
  c.data.dim = 2;
  c.data.n = 150;
  c.n_test = 300;
  c.generator.junk_prob = 0.1;
  c.generator.junk_spread = 4.0;
  c.n_fake = 240;
  c.m1.dr.epochs = 5;
  c.m1.dr_hidden = {8};
  c.m1.n_fake_train = 300;
  c.m1.calibration_size = 300;
  c.teacher.hidden = {16};
  c.teacher.train.epochs = 15;
  c.teacher.train.batch_size = 16;
  c.teacher.train.learning_rate = 0.02;
  c.student.hidden = {6};
  c.student.train.epochs = 3;
  c.student.train.batch_size = 32;
  c.student.train.learning_rate = 0.01;
  c.seed = seed;
  return c;
}

Dataset tagged(std::size_t n, Provenance p) {
  Dataset ds(Task::classification(2), 1);
  for (std::size_t i = 0; i < n; ++i) ds.add({{static_cast<double>(i)}, ClassIndex{static_cast<int>(i % 2)}, p});
  return ds;
}

TEST(Augment, ThetaAndProvenance) {
  const auto aug = augment(tagged(800, Provenance::real), tagged(1200, Provenance::fake_m2));
  EXPECT_EQ(aug.size(), 2000u);
  EXPECT_DOUBLE_EQ(mixture_theta(800, 1200), 0.4);
  const auto h = aug.provenance_histogram();
  EXPECT_EQ(h.at(Provenance::real), 800u);
  EXPECT_EQ(h.at(Provenance::fake_m2), 1200u);
  EXPECT_EQ(h.size(), 2u);
}

TEST(Augment, EmptyFakesReturnReal) {
  const auto real = tagged(10, Provenance::real);
  EXPECT_EQ(augment(real, Dataset(real.task(), 1)), real);
  EXPECT_EQ(mixture_theta(10, 0), 1.0);
  Dataset other(Task::classification(3), 1);
  other.add({{0.0}, ClassIndex{2}, Provenance::fake_m2});
  EXPECT_THROW(augment(real, other), std::invalid_argument);
}

TEST(CapSamples, OrderedSubset) {
  const auto ds = tagged(50, Provenance::fake_m2);
  const auto capped = cap_samples(ds, 20, 3);
  ASSERT_EQ(capped.size(), 20u);
  double prev = -1;
  for (const auto& s : capped) {
    EXPECT_GT(s.features[0], prev);
    prev = s.features[0];
  }
  EXPECT_EQ(cap_samples(ds, std::nullopt, 3), ds);
  EXPECT_EQ(cap_samples(ds, 50, 3), ds);
  EXPECT_TRUE(cap_samples(ds, 0, 3).empty());
}

TEST(TrainStudent, BlkdNeedsTeacher) {
  const auto real = tagged(10, Provenance::real);
  const auto init = nn::init_params(nn::NetSpec::classifier(1, {2}, 2), 1);
  nn::TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train_student(real, init, cfg, StudentMode::blkd, 0.5, 5.0), std::invalid_argument);
}

TEST(TrainStudent, BlkdLambdaZeroUnitTemperatureEqualsPlain) {
  const auto real = tagged(40, Provenance::real);
  const auto init = nn::init_params(nn::NetSpec::classifier(1, {3}, 2), 1);
  const auto teacher = nn::init_params(nn::NetSpec::classifier(1, {3}, 2), 2);
  nn::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.001;
  EXPECT_EQ(train_student(real, init, cfg, StudentMode::blkd, 0.0, 1.0, &teacher),
            train_student(real, init, cfg, StudentMode::plain, 0.0, 1.0, &teacher));
}

class PipelineTest : public ::testing::TestWithParam<bool> {};

TEST_P(PipelineTest, NokdEndpointsAreBitExact) {
  const auto cfg = small_config(GetParam());
  PrepareOptions opt;
  opt.need_raw = true;
  const auto st = prepare_stages(cfg, opt);

  nn::TrainConfig sc = cfg.student.train;
  sc.seed = derive_seed(cfg.seed, "student.train");
  EXPECT_EQ(st.nokd, train_student(st.real_train, st.student_init, sc, StudentMode::plain, 0, 1));

  VariantOptions rho0 = variant_of(cfg);
  rho0.rho = 0.0;
  const auto a = finish_pipeline(cfg, st, rho0);
  EXPECT_EQ(a.student, st.nokd);
  EXPECT_EQ(a.report.m_fake, 0u);
  EXPECT_EQ(a.report.theta, 1.0);
  EXPECT_EQ(a.report.student_cgankd.value(), a.report.student_nokd.value());

  VariantOptions cap0 = variant_of(cfg);
  cap0.mg_cap = 0;
  EXPECT_EQ(finish_pipeline(cfg, st, cap0).student, st.nokd);
}

TEST_P(PipelineTest, ThetaBookkeeping) {
  const auto cfg = small_config(GetParam());
  const auto st = prepare_stages(cfg);
  for (double rho : {0.3, 0.7, 1.0}) {
    VariantOptions v = variant_of(cfg);
    v.rho = rho;
    const auto r = finish_pipeline(cfg, st, v);
    EXPECT_EQ(r.report.m_fake, r.processed_fakes.size());
    EXPECT_DOUBLE_EQ(r.report.theta, static_cast<double>(r.report.n_real) / (r.report.n_real + r.report.m_fake));
    EXPECT_EQ(r.report.n_real, cfg.data.n);
    for (const auto& s : r.processed_fakes) EXPECT_EQ(s.provenance, Provenance::fake_m2);
  }
}

TEST_P(PipelineTest, Deterministic) {
  const auto cfg = small_config(GetParam(), 4);
  const auto a = run_pipeline(cfg), b = run_pipeline(cfg);
  EXPECT_EQ(a.teacher.value(), b.teacher.value());
  EXPECT_EQ(a.student_nokd.value(), b.student_nokd.value());
  EXPECT_EQ(a.student_cgankd.value(), b.student_cgankd.value());
  EXPECT_EQ(a.m_fake, b.m_fake);
}

TEST_P(PipelineTest, AblationSubsetChain) {
  const auto cfg = small_config(GetParam(), 2);
  const auto rows = run_ablation(cfg);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].variant, "raw");
  EXPECT_EQ(rows[0].fake_count, cfg.n_fake);
  EXPECT_EQ(rows[1].fake_count, cfg.n_fake);
  EXPECT_LE(rows[2].fake_count, rows[1].fake_count);
  EXPECT_EQ(rows[3].fake_count, rows[2].fake_count);
  if (GetParam()) {
    EXPECT_EQ(rows[2].metrics.value(), rows[3].metrics.value());
  }
}

INSTANTIATE_TEST_SUITE_P(Tasks, PipelineTest, ::testing::Values(true, false),
                         [](const auto& info) { return info.param ? "classification" : "regression"; });

TEST(Pipeline, RegressionFakesCarryTeacherLabels) {
  const auto cfg = small_config(false);
  const auto st = prepare_stages(cfg);
  const auto r = finish_pipeline(cfg, st, variant_of(cfg));
  ASSERT_FALSE(r.processed_fakes.empty());
  for (const auto& s : r.processed_fakes)
    EXPECT_EQ(value_of(s.label), std::clamp(nn::forward(st.teacher, s.features)[0], 0.0, 1.0));
}

TEST(Pipeline, BlkdWithoutFakesIsNokd) {
  auto cfg = small_config(true);
  cfg.student_mode = StudentMode::blkd;
  cfg.rho = 0.0;
  const auto r = run_pipeline(cfg);
  EXPECT_EQ(r.student_cgankd.value(), r.student_nokd.value());
}

TEST(Pipeline, StageErrorsNameTheStage) {
  auto cfg = small_config(true);
  cfg.n_fake = 0;
  try {
    run_pipeline(cfg);
    FAIL() << "expected a StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  cfg = small_config(true);
  cfg.m1.gamma = 0.5;
  try {
    run_pipeline(cfg);
    FAIL() << "expected a StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "m1");
  }
}

TEST(Pipeline, CheckpointsAreWritten) {
  const auto dir = std::filesystem::temp_directory_path() / "cgankd_distill_ck";
  std::filesystem::remove_all(dir);
  run_pipeline(small_config(true), dir);
  for (const char* f : {"real_train.txt", "test.txt", "teacher.net", "generator.txt", "dr.txt", "fake_m1.txt",
                        "fake_m2.txt", "student.net"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(read_dataset((dir / "fake_m1.txt").string()).size(), 240u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace cgankd
