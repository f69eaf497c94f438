#include <gtest/gtest.h>

#include <sstream>

#include "cgankd/dataset.hpp"
#include "cgankd/rng.hpp"

namespace cgankd {
namespace {

Dataset random_dataset(std::uint64_t seed, bool classification) {
  Rng r(seed);
  const std::size_t dim = 1 + r.below(4);
  Dataset ds(classification ? Task::classification(2 + static_cast<int>(r.below(4))) : Task::regression(-3.0, 7.5),
             dim);
  const std::size_t n = r.below(30);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    for (std::size_t j = 0; j < dim; ++j) s.features.push_back(r.normal(0.0, 1e3) * r.uniform());
    if (classification)
      s.label = ClassIndex{static_cast<int>(r.below(static_cast<std::uint64_t>(ds.task().classes)))};
    else
      s.label = ScalarLabel{r.uniform()};
    s.provenance = kAllProvenances[r.below(4)];
    ds.add(std::move(s));
  }
  return ds;
}

TEST(Dataset, RoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Dataset ds = random_dataset(seed, seed % 2 == 0);
    std::stringstream ss;
    write_dataset(ds, ss);
    EXPECT_EQ(read_dataset(ss), ds) << "seed " << seed;
  }
}

TEST(Dataset, RejectsClassOutOfRange) {
  Dataset ds(Task::classification(3), 2);
  EXPECT_THROW(ds.add({{0.0, 1.0}, ClassIndex{3}, Provenance::real}), FormatError);
  EXPECT_THROW(ds.add({{0.0, 1.0}, ClassIndex{-1}, Provenance::real}), FormatError);
  EXPECT_NO_THROW(ds.add({{0.0, 1.0}, ClassIndex{2}, Provenance::real}));
}

TEST(Dataset, RejectsRegressionLabelOutsideUnitInterval) {
  Dataset ds(Task::regression(0, 1), 1);
  EXPECT_THROW(ds.add({{0.0}, ScalarLabel{1.0000001}, Provenance::real}), FormatError);
  EXPECT_THROW(ds.add({{0.0}, ScalarLabel{-1e-9}, Provenance::real}), FormatError);
  EXPECT_NO_THROW(ds.add({{0.0}, ScalarLabel{1.0}, Provenance::real}));
}

TEST(Dataset, RejectsWrongDimensionAndNonFinite) {
  Dataset ds(Task::classification(2), 2);
  EXPECT_THROW(ds.add({{0.0}, ClassIndex{0}, Provenance::real}), FormatError);
  EXPECT_THROW(ds.add({{0.0, std::nan("")}, ClassIndex{0}, Provenance::real}), FormatError);
  EXPECT_THROW(ds.add({{0.0, 1.0}, ScalarLabel{0.5}, Provenance::real}), FormatError);
}

TEST(Dataset, MalformedFilesAreRejected) {
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return read_dataset(is);
  };
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v2\ntask=classification C=2\ndim=1\n"), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v1\ntask=classification C=1\ndim=1\n"), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v1\ntask=regression lo=1 hi=1\ndim=1\n"), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v1\ntask=classification C=2\ndim=0\n"), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v1\ntask=classification C=2\ndim=2\n0,real,1\n"), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v1\ntask=classification C=2\ndim=1\n0,bogus,1\n"), FormatError);
  EXPECT_THROW(parse("cgankd-dataset v1\ntask=classification C=2\ndim=1\n2,real,1\n"), FormatError);
  const Dataset ok = parse("cgankd-dataset v1\ntask=regression lo=0 hi=100\ndim=1\n0.25,fake_m2,3\n");
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].provenance, Provenance::fake_m2);
  EXPECT_DOUBLE_EQ(ok.task().unnormalize(value_of(ok[0].label)), 25.0);
}

TEST(Dataset, HistogramsCountEverySample) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const Dataset ds = random_dataset(seed, true);
    std::size_t total = 0;
    for (auto [p, n] : ds.provenance_histogram()) total += n;
    EXPECT_EQ(total, ds.size());
    total = 0;
    for (auto n : ds.class_counts()) total += n;
    EXPECT_EQ(total, ds.size());
    for (const auto& s : ds.with_provenance(Provenance::fake_m1)) EXPECT_EQ(s.provenance, Provenance::fake_m1);
  }
}

TEST(Dataset, EncodeLabel) {
  const auto t = Task::classification(3);
  EXPECT_EQ(encode_label(ClassIndex{1}, t), (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(label_encoding_dim(t), 3u);
  const auto r = Task::regression(0, 1);
  EXPECT_EQ(encode_label(ScalarLabel{0.3}, r), (std::vector<double>{0.3}));
  EXPECT_EQ(label_encoding_dim(r), 1u);
}

}  // namespace
}  // namespace cgankd
