#pragma once

// Synthetic conditional data families.
//
// blobs: C isotropic Gaussians whose means sit on a circle of radius
//   `separation` in the first two coordinates.
// ring:  y ~ Uniform[0,1]; the noiseless point lies at angle 2*pi*y on a
//   spiral of radius base + slope*y, so y is recoverable from the features.
// Coordinates beyond the second carry pure noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "cgankd/dataset.hpp"
#include "cgankd/rng.hpp"

namespace cgankd {

struct BlobsFamily {
  int classes = 4;
  double separation = 3.0;
  double noise_std = 1.0;

  std::vector<double> mean(int c, std::size_t dim) const {
    std::vector<double> mu(dim, 0.0);
    const double angle = 2.0 * std::numbers::pi * c / classes;
    mu[0] = separation * std::cos(angle);
    mu[1] = separation * std::sin(angle);
    return mu;
  }
};

struct RingFamily {
  double radius_base = 1.0;
  double radius_slope = 1.0;
  double noise_std = 0.05;
  double label_lo = 0.0;
  double label_hi = 1.0;

  double radius(double y) const { return radius_base + radius_slope * y; }

  std::vector<double> curve(double y, std::size_t dim) const {
    std::vector<double> x(dim, 0.0);
    const double angle = 2.0 * std::numbers::pi * y;
    x[0] = radius(y) * std::cos(angle);
    x[1] = radius(y) * std::sin(angle);
    return x;
  }

  /// Inverse of the noiseless curve: the label at the feature angle, with the
  /// y=0 / y=1 seam resolved by whichever endpoint lies closer.
  double true_label(std::span<const double> x) const {
    double a = std::atan2(x[1], x[0]);
    if (a < 0) a += 2.0 * std::numbers::pi;
    const double y = a / (2.0 * std::numbers::pi);
    auto dist = [&](double c) {
      const auto p = curve(c, 2);
      return std::hypot(x[0] - p[0], x[1] - p[1]);
    };
    if (y < 0.25 && dist(1.0) < dist(y)) return 1.0;
    if (y > 0.75 && dist(0.0) < dist(y)) return 0.0;
    return std::clamp(y, 0.0, 1.0);
  }
};

using Family = std::variant<BlobsFamily, RingFamily>;

struct SynthConfig {
  Family family = BlobsFamily{};
  std::size_t dim = 2;
  std::size_t n = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (n == 0) throw std::invalid_argument("SynthConfig: n must be positive");
    if (dim < 2) throw std::invalid_argument("SynthConfig: dim must be at least 2");
    if (const auto* b = std::get_if<BlobsFamily>(&family)) {
      if (b->classes < 2) throw std::invalid_argument("SynthConfig: blobs need at least 2 classes");
      if (!(b->noise_std >= 0.0)) throw std::invalid_argument("SynthConfig: noise_std must be >= 0");
    } else {
      const auto& r = std::get<RingFamily>(family);
      if (!(r.noise_std >= 0.0)) throw std::invalid_argument("SynthConfig: noise_std must be >= 0");
      if (!(r.label_hi > r.label_lo)) throw std::invalid_argument("SynthConfig: label range must satisfy lo < hi");
    }
  }

  bool is_classification() const { return std::holds_alternative<BlobsFamily>(family); }

  Task task() const {
    if (const auto* b = std::get_if<BlobsFamily>(&family)) return Task::classification(b->classes);
    const auto& r = std::get<RingFamily>(family);
    return Task::regression(r.label_lo, r.label_hi);
  }
};

/// Features of a class-c draw from the blobs family.
inline std::vector<double> draw_blob(const BlobsFamily& f, int c, std::size_t dim, Rng& rng) {
  auto x = f.mean(c, dim);
  for (auto& v : x) v += f.noise_std * rng.normal();
  return x;
}

/// Features of a draw with label y from the ring family.
inline std::vector<double> draw_ring(const RingFamily& f, double y, std::size_t dim, Rng& rng) {
  auto x = f.curve(y, dim);
  for (auto& v : x) v += f.noise_std * rng.normal();
  return x;
}

/// Class-conditional draw from either family.
inline std::vector<double> draw_features(const SynthConfig& cfg, const Label& label, Rng& rng) {
  if (const auto* b = std::get_if<BlobsFamily>(&cfg.family)) return draw_blob(*b, class_of(label), cfg.dim, rng);
  return draw_ring(std::get<RingFamily>(cfg.family), value_of(label), cfg.dim, rng);
}

/// Sample i has class i mod C, so classes are balanced up to a round-robin remainder.
inline Dataset make_classification(const SynthConfig& cfg) {
  cfg.validate();
  const auto* fam = std::get_if<BlobsFamily>(&cfg.family);
  if (!fam) throw std::invalid_argument("make_classification: family must be blobs");
  Dataset ds(cfg.task(), cfg.dim);
  ds.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const int c = static_cast<int>(i % static_cast<std::size_t>(fam->classes));
    ds.add(Sample{draw_blob(*fam, c, cfg.dim, rng), ClassIndex{c}, Provenance::real});
  }
  return ds;
}

inline Dataset make_regression(const SynthConfig& cfg) {
  cfg.validate();
  const auto* fam = std::get_if<RingFamily>(&cfg.family);
  if (!fam) throw std::invalid_argument("make_regression: family must be ring");
  Dataset ds(cfg.task(), cfg.dim);
  ds.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const double y = rng.uniform();
    ds.add(Sample{draw_ring(*fam, y, cfg.dim, rng), ScalarLabel{y}, Provenance::real});
  }
  return ds;
}

inline Dataset make_dataset(const SynthConfig& cfg) {
  return cfg.is_classification() ? make_classification(cfg) : make_regression(cfg);
}

/// Random partition into (train, held-out). Classification is stratified:
/// each class contributes round(fraction * n_c) samples to the training side.
/// Both outputs keep the input order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("split: fraction must be in (0,1)");
  std::vector<char> in_train(ds.size(), 0);
  auto take = [&](std::vector<std::size_t> idx, std::uint64_t stream, bool stratified) {
    Rng rng(stream);
    rng.shuffle(idx);
    auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    if (stratified) k = std::clamp<std::size_t>(k, 1, idx.size() - 1);
    for (std::size_t i = 0; i < k; ++i) in_train[idx[i]] = 1;
  };
  if (ds.task().is_classification()) {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.task().classes));
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(class_of(ds[i].label))].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].size() < 2)
        throw std::invalid_argument("split: class " + std::to_string(c) + " has fewer than 2 samples");
      take(std::move(by_class[c]), derive_seed(seed, static_cast<std::uint64_t>(c)), true);
    }
  } else {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    take(std::move(idx), derive_seed(seed, "split"), false);
  }
  Dataset train(ds.task(), ds.dim()), held(ds.task(), ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) (in_train[i] ? train : held).add(ds[i]);
  return {std::move(train), std::move(held)};
}

}  // namespace cgankd
