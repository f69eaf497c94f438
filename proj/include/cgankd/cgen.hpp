#pragma once

// Conditional generators: a small conditional GAN trained on the real set, and
// a corrupted oracle that draws from the true family and then injects label
// flips / label noise and off-manifold junk at known rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "cgankd/dataset.hpp"
#include "cgankd/nncore.hpp"
#include "cgankd/rng.hpp"
#include "cgankd/synthdata.hpp"

namespace cgankd {

struct TrainedCgan {
  nn::NetParams generator;
  std::size_t noise_dim = 1;
  Task task;
  std::size_t dim = 0;
};

struct CorruptedOracle {
  SynthConfig base;
  double flip_prob = 0.0;   // classification: relabel to a uniformly chosen wrong class
  double label_std = 0.0;   // regression: features follow clamp(y + N(0, label_std^2), 0, 1)
  double junk_prob = 0.0;   // replace features by N(0, junk_spread^2 I)
  double junk_spread = 10.0;
};

using GeneratorHandle = std::variant<TrainedCgan, CorruptedOracle>;

inline Task generator_task(const GeneratorHandle& h) {
  if (const auto* g = std::get_if<TrainedCgan>(&h)) return g->task;
  return std::get<CorruptedOracle>(h).base.task();
}

inline std::size_t generator_dim(const GeneratorHandle& h) {
  if (const auto* g = std::get_if<TrainedCgan>(&h)) return g->dim;
  return std::get<CorruptedOracle>(h).base.dim;
}

inline GeneratorHandle make_oracle(const SynthConfig& base, double label_noise, double junk_prob, double junk_spread) {
  base.validate();
  if (!(junk_prob >= 0.0 && junk_prob <= 1.0)) throw std::invalid_argument("make_oracle: junk_prob must be in [0,1]");
  if (!(junk_spread > 0.0)) throw std::invalid_argument("make_oracle: junk_spread must be positive");
  CorruptedOracle o{base, 0.0, 0.0, junk_prob, junk_spread};
  if (base.is_classification()) {
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw std::invalid_argument("make_oracle: flip_prob must be in [0,1]");
    o.flip_prob = label_noise;
  } else {
    if (!(label_noise >= 0.0)) throw std::invalid_argument("make_oracle: gaussian_std must be >= 0");
    o.label_std = label_noise;
  }
  return o;
}

/// Ground truth behind one oracle draw.
struct OracleDraw {
  Sample sample;       // assigned label, generated features
  Label actual;        // label the features were actually drawn under
  bool flipped = false;
  bool junk = false;
};

inline OracleDraw draw_oracle(const CorruptedOracle& o, const Label& assigned, Rng& rng) {
  OracleDraw d;
  d.sample.label = assigned;
  d.sample.provenance = Provenance::fake_raw;
  // Fixed draw order: label noise, junk decision, features.
  if (o.base.is_classification()) {
    const int classes = std::get<BlobsFamily>(o.base.family).classes;
    const int c = class_of(assigned);
    const bool flip = rng.uniform() < o.flip_prob;
    const int wrong = (c + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)))) % classes;
    d.actual = ClassIndex{flip ? wrong : c};
    d.flipped = flip;
  } else {
    const double y = value_of(assigned);
    const double noisy = std::clamp(y + o.label_std * rng.normal(), 0.0, 1.0);
    d.actual = ScalarLabel{noisy};
    d.flipped = noisy != y;
  }
  d.junk = rng.uniform() < o.junk_prob;
  if (d.junk) {
    d.sample.features.resize(o.base.dim);
    for (auto& v : d.sample.features) v = o.junk_spread * rng.normal();
  } else {
    d.sample.features = draw_features(o.base, d.actual, rng);
  }
  return d;
}

inline std::vector<double> gan_input(const std::vector<double>& noise, const Label& label, const Task& task) {
  std::vector<double> in = noise;
  const auto enc = encode_label(label, task);
  in.insert(in.end(), enc.begin(), enc.end());
  return in;
}

inline std::vector<double> draw_cgan(const TrainedCgan& g, const Label& label, Rng& rng) {
  std::vector<double> z(g.noise_dim);
  for (auto& v : z) v = rng.normal();
  return nn::forward(g.generator, gan_input(z, label, g.task));
}

/// Oracle draws with their ground truth. Element i uses the sub-stream
/// (seed, i), so a shorter request is a prefix of a longer one.
inline std::vector<OracleDraw> sample_with_truth(const CorruptedOracle& o, const std::vector<Label>& labels,
                                                 std::uint64_t seed) {
  std::vector<OracleDraw> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(draw_oracle(o, labels[i], rng));
  }
  return out;
}

/// One fake sample per requested label (provenance fake_raw); prefix-stable in
/// the same sense as sample_with_truth.
inline Dataset sample(const GeneratorHandle& h, const std::vector<Label>& labels, std::uint64_t seed) {
  if (labels.empty()) throw std::invalid_argument("sample: no labels requested");
  Dataset ds(generator_task(h), generator_dim(h));
  ds.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    if (const auto* o = std::get_if<CorruptedOracle>(&h)) {
      ds.add(draw_oracle(*o, labels[i], rng).sample);
    } else {
      const auto& g = std::get<TrainedCgan>(h);
      ds.add(Sample{draw_cgan(g, labels[i], rng), labels[i], Provenance::fake_raw});
    }
  }
  return ds;
}

/// Labels resampled with replacement from the empirical label distribution.
inline std::vector<Label> sample_labels(const Dataset& train_set, std::size_t n, std::uint64_t seed) {
  if (train_set.empty()) throw std::invalid_argument("sample_labels: empty training set");
  if (n == 0) throw std::invalid_argument("sample_labels: n must be positive");
  std::vector<Label> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(train_set[rng.below(train_set.size())].label);
  }
  return out;
}

/// N labels cycling through the classes: N/C each, remainder round-robin.
inline std::vector<Label> balanced_class_labels(int classes, std::size_t n) {
  std::vector<Label> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ClassIndex{static_cast<int>(i % static_cast<std::size_t>(classes))});
  return out;
}

// ---------------------------------------------------------------------------
// Conditional GAN

struct GanTrainConfig {
  std::size_t iterations = 3000;
  std::size_t batch_size = 64;
  double lr_generator = 0.01;
  double lr_discriminator = 0.01;
  double momentum = 0.5;
  std::size_t noise_dim = 2;
  std::vector<std::size_t> generator_hidden{32, 32};
  std::vector<std::size_t> discriminator_hidden{32, 32};
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0 || noise_dim == 0) throw std::invalid_argument("GanTrainConfig: sizes must be positive");
    if (!(lr_generator > 0.0 && lr_discriminator > 0.0))
      throw std::invalid_argument("GanTrainConfig: learning rates must be positive");
  }
};

struct CganTrainResult {
  GeneratorHandle handle;
  nn::NetParams discriminator;
  std::vector<double> d_loss;
  std::vector<double> g_loss;
};

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// Alternating updates with the non-saturating logistic loss. Both networks
/// see the label encoding concatenated to their input.
inline CganTrainResult train_cgan_detailed(const Dataset& train_set, const GanTrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train_cgan: empty training set");
  const Task task = train_set.task();
  const std::size_t d = train_set.dim();
  const std::size_t enc = label_encoding_dim(task);
  const auto gspec = nn::NetSpec::linear(cfg.noise_dim + enc, cfg.generator_hidden, d);
  const auto dspec = nn::NetSpec::linear(d + enc, cfg.discriminator_hidden, 1);
  nn::NetParams gen = nn::init_params(gspec, derive_seed(cfg.seed, "generator"));
  nn::NetParams disc = nn::init_params(dspec, derive_seed(cfg.seed, "discriminator"));
  nn::SgdMomentum gopt(gspec, cfg.momentum, 0.0), dopt(dspec, cfg.momentum, 0.0);
  nn::Gradients ggrad = nn::zeros_like(gspec), dgrad = nn::zeros_like(dspec);
  nn::Activations ga, da;
  std::vector<double> dinput;
  std::vector<double> d_losses, g_losses;
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);

  auto disc_input = [&](const std::vector<double>& x, const Label& y) {
    std::vector<double> in = x;
    const auto e = encode_label(y, task);
    in.insert(in.end(), e.begin(), e.end());
    return in;
  };

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(it)));
    // Discriminator step.
    dgrad = nn::zeros_like(dspec);
    double dl = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Sample& real = train_set[rng.below(train_set.size())];
      const double sr = nn::forward(disc, disc_input(real.features, real.label), da)[0];
      dl += -std::log(std::max(sigmoid(sr), nn::kProbFloor));
      const double gr = (sigmoid(sr) - 1.0) * inv_b;
      nn::backward(disc, da, std::span<const double>(&gr, 1), dgrad);

      const Label& fy = train_set[rng.below(train_set.size())].label;
      std::vector<double> z(cfg.noise_dim);
      for (auto& v : z) v = rng.normal();
      const auto xf = nn::forward(gen, gan_input(z, fy, task));
      const double sf = nn::forward(disc, disc_input(xf, fy), da)[0];
      dl += -std::log(std::max(1.0 - sigmoid(sf), nn::kProbFloor));
      const double gf = sigmoid(sf) * inv_b;
      nn::backward(disc, da, std::span<const double>(&gf, 1), dgrad);
    }
    dopt.step(disc, dgrad, cfg.lr_discriminator);

    // Generator step.
    ggrad = nn::zeros_like(gspec);
    nn::Gradients scratch = nn::zeros_like(dspec);
    double gl = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Label& fy = train_set[rng.below(train_set.size())].label;
      std::vector<double> z(cfg.noise_dim);
      for (auto& v : z) v = rng.normal();
      const auto& xf = nn::forward(gen, gan_input(z, fy, task), ga);
      const double sf = nn::forward(disc, disc_input(xf, fy), da)[0];
      gl += -std::log(std::max(sigmoid(sf), nn::kProbFloor));
      const double gs = (sigmoid(sf) - 1.0) * inv_b;
      nn::backward(disc, da, std::span<const double>(&gs, 1), scratch, &dinput);
      nn::backward(gen, ga, std::span<const double>(dinput.data(), d), ggrad);
    }
    gopt.step(gen, ggrad, cfg.lr_generator);

    dl *= inv_b;
    gl *= inv_b;
    if (!std::isfinite(dl) || !std::isfinite(gl) || !gen.finite() || !disc.finite())
      throw NumericError("train_cgan: non-finite loss at iteration " + std::to_string(it));
    d_losses.push_back(dl);
    g_losses.push_back(gl);
  }
  return CganTrainResult{TrainedCgan{std::move(gen), cfg.noise_dim, task, d}, std::move(disc), std::move(d_losses),
                         std::move(g_losses)};
}

inline GeneratorHandle train_cgan(const Dataset& train_set, const GanTrainConfig& cfg) {
  return train_cgan_detailed(train_set, cfg).handle;
}

// ---------------------------------------------------------------------------
// Versioned text format: `cgankd-generator v1`, then key=value lines, then
// (for a trained cGAN) the generator network.

inline void write_synth_config(const SynthConfig& c, std::ostream& os) {
  os << "dim=" << c.dim << "\nn=" << c.n << "\nseed=" << c.seed << '\n';
  if (const auto* b = std::get_if<BlobsFamily>(&c.family)) {
    os << "family=blobs\nclasses=" << b->classes << "\nseparation=" << format_double(b->separation)
       << "\nnoise_std=" << format_double(b->noise_std) << '\n';
  } else {
    const auto& r = std::get<RingFamily>(c.family);
    os << "family=ring\nradius_base=" << format_double(r.radius_base) << "\nradius_slope="
       << format_double(r.radius_slope) << "\nnoise_std=" << format_double(r.noise_std)
       << "\nlabel_lo=" << format_double(r.label_lo) << "\nlabel_hi=" << format_double(r.label_hi) << '\n';
  }
}

inline std::map<std::string, std::string> read_kv_block(std::istream& is, std::size_t lines) {
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t i = 0; i < lines; ++i) {
    if (!std::getline(is, line)) throw FormatError("truncated key-value block");
    const auto t = trim(line);
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw FormatError("expected key=value, got '" + line + "'");
    kv[std::string(t.substr(0, eq))] = std::string(t.substr(eq + 1));
  }
  return kv;
}

inline std::string kv_get(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing key '" + key + "'");
  return it->second;
}

inline SynthConfig read_synth_config(std::istream& is) {
  auto head = read_kv_block(is, 4);
  SynthConfig c;
  c.dim = static_cast<std::size_t>(parse_int(kv_get(head, "dim")));
  c.n = static_cast<std::size_t>(parse_int(kv_get(head, "n")));
  c.seed = parse_u64(kv_get(head, "seed"));
  const auto fam = kv_get(head, "family");
  if (fam == "blobs") {
    auto kv = read_kv_block(is, 3);
    c.family = BlobsFamily{static_cast<int>(parse_int(kv_get(kv, "classes"))), parse_double(kv_get(kv, "separation")),
                           parse_double(kv_get(kv, "noise_std"))};
  } else if (fam == "ring") {
    auto kv = read_kv_block(is, 5);
    c.family = RingFamily{parse_double(kv_get(kv, "radius_base")), parse_double(kv_get(kv, "radius_slope")),
                          parse_double(kv_get(kv, "noise_std")), parse_double(kv_get(kv, "label_lo")),
                          parse_double(kv_get(kv, "label_hi"))};
  } else {
    throw FormatError("unknown family '" + fam + "'");
  }
  c.validate();
  return c;
}

inline void write_generator(const GeneratorHandle& h, std::ostream& os) {
  os << "cgankd-generator v1\n";
  if (const auto* o = std::get_if<CorruptedOracle>(&h)) {
    os << "kind=oracle\nflip_prob=" << format_double(o->flip_prob) << "\nlabel_std=" << format_double(o->label_std)
       << "\njunk_prob=" << format_double(o->junk_prob) << "\njunk_spread=" << format_double(o->junk_spread) << '\n';
    write_synth_config(o->base, os);
  } else {
    const auto& g = std::get<TrainedCgan>(h);
    os << "kind=cgan\n" << task_header(g.task) << "\ndim=" << g.dim << "\nnoise_dim=" << g.noise_dim << '\n';
    nn::write_params(g.generator, os);
  }
}

inline GeneratorHandle read_generator(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "cgankd-generator v1")
    throw FormatError("missing 'cgankd-generator v1' header");
  auto kind = read_kv_block(is, 1);
  if (kv_get(kind, "kind") == "oracle") {
    auto kv = read_kv_block(is, 4);
    CorruptedOracle o;
    o.flip_prob = parse_double(kv_get(kv, "flip_prob"));
    o.label_std = parse_double(kv_get(kv, "label_std"));
    o.junk_prob = parse_double(kv_get(kv, "junk_prob"));
    o.junk_spread = parse_double(kv_get(kv, "junk_spread"));
    o.base = read_synth_config(is);
    return o;
  }
  if (kv_get(kind, "kind") == "cgan") {
    if (!std::getline(is, line)) throw FormatError("missing task header");
    const Task task = parse_task_header(line);
    auto kv = read_kv_block(is, 2);
    const auto dim = static_cast<std::size_t>(parse_int(kv_get(kv, "dim")));
    const auto noise_dim = static_cast<std::size_t>(parse_int(kv_get(kv, "noise_dim")));
    auto net = nn::read_params(is);
    if (net.spec.input_dim() != noise_dim + label_encoding_dim(task) || net.spec.output_dim() != dim)
      throw FormatError("generator network shape does not match its header");
    return TrainedCgan{std::move(net), noise_dim, task, dim};
  }
  throw FormatError("unknown generator kind");
}

}  // namespace cgankd
