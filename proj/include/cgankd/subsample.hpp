#pragma once

// Conditional density-ratio rejection sampling.
//
// A binary classifier D(x, y) is trained to separate real pairs (target 1)
// from generated pairs (target 0). With N_r real and N_g fake training pairs
// its odds estimate (N_r p_r(x|y)) / (N_g p_g(x|y)), so
//     r(x|y) = p/(1-p) * N_g/N_r.
// Generated pairs are then accepted with probability min(r / M_max, 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cgankd/cgen.hpp"
#include "cgankd/dataset.hpp"
#include "cgankd/nncore.hpp"
#include "cgankd/rng.hpp"

namespace cgankd {

struct DensityRatioModel {
  nn::NetParams net;  // one logit on features ++ label encoding
  Task task;
  std::size_t dim = 0;
  double prior_correction = 1.0;  // N_fake_train / N_real_train
  double ceiling = 1.0;           // M_max
};

inline nn::TrainConfig default_dr_train() {
  nn::TrainConfig c;
  c.epochs = 40;
  c.batch_size = 64;
  c.learning_rate = 0.05;
  c.loss = nn::LossSpec::logistic();
  return c;
}

struct SubsampleConfig {
  nn::TrainConfig dr = default_dr_train();
  std::vector<std::size_t> dr_hidden{32, 32};
  std::size_t n_fake_train = 2000;
  std::size_t target_count = 1000;   // N^g
  std::size_t calibration_size = 2000;
  double gamma = 1.2;
  std::uint64_t seed = 0;
};

inline std::vector<double> dr_input(const DensityRatioModel& m, const Sample& s) {
  std::vector<double> in = s.features;
  const auto e = encode_label(s.label, m.task);
  in.insert(in.end(), e.begin(), e.end());
  return in;
}

/// Estimated p_r(x|y) / p_g(x|y); finite and nonnegative.
inline double ratio(const DensityRatioModel& m, const Sample& s) {
  if (s.features.size() != m.dim) throw std::invalid_argument("ratio: sample dimension mismatch");
  const double z = nn::forward(m.net, dr_input(m, s))[0];
  const double p = std::clamp(sigmoid(z), nn::kProbFloor, 1.0 - nn::kProbFloor);
  return p / (1.0 - p) * m.prior_correction;
}

/// Trains the real-vs-fake classifier and sets M_max = gamma * max ratio over
/// `calibration` (the fake training set when none is given).
inline DensityRatioModel train_dr(const Dataset& real, const Dataset& fake, const SubsampleConfig& cfg,
                                  const Dataset* calibration = nullptr) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("train_dr: empty real or fake set");
  if (!(real.task() == fake.task()) || real.dim() != fake.dim())
    throw std::invalid_argument("train_dr: real and fake sets differ in task or dimension");
  if (!(cfg.gamma >= 1.0)) throw std::invalid_argument("train_dr: gamma must be >= 1");
  const Task task = real.task();
  const auto spec = nn::NetSpec::linear(real.dim() + label_encoding_dim(task), cfg.dr_hidden, 1);
  DensityRatioModel m{nn::init_params(spec, derive_seed(cfg.seed, "dr.init")), task, real.dim(),
                      static_cast<double>(fake.size()) / static_cast<double>(real.size()), 1.0};
  std::vector<nn::Example> ex;
  ex.reserve(real.size() + fake.size());
  for (const auto& s : real) ex.push_back({dr_input(m, s), {-1, 1.0, {}}});
  for (const auto& s : fake) ex.push_back({dr_input(m, s), {-1, 0.0, {}}});
  nn::TrainConfig tc = cfg.dr;
  tc.loss = nn::LossSpec::logistic();
  tc.seed = derive_seed(cfg.seed, "dr.train");
  m.net = nn::train_examples(std::move(m.net), ex, tc).params;

  const Dataset& calib = calibration ? *calibration : fake;
  double max_ratio = 0.0;
  for (const auto& s : calib) max_ratio = std::max(max_ratio, ratio(m, s));
  m.ceiling = cfg.gamma * std::max(max_ratio, nn::kProbFloor);
  return m;
}

struct RejectionStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const { return proposals ? static_cast<double>(accepted) / proposals : 0.0; }
};

/// Window used to detect acceptance-rate collapse.
inline constexpr std::size_t kCollapseWindow = 50000;
inline constexpr double kCollapseRate = 1e-4;

/// Generic rejection sampler. For each requested label slot i, proposals are
/// drawn from the sub-stream (seed, i) as `draw(label, rng)` and accepted when
/// u * M_max < ratio(draw), u ~ Uniform[0,1) taken right after the proposal.
template <class Draw, class DrawFn, class RatioFn>
std::vector<Draw> rejection_sample_draws(DrawFn&& draw, RatioFn&& ratio_of, double ceiling,
                                         const std::vector<Label>& labels, std::uint64_t seed,
                                         RejectionStats* stats = nullptr) {
  if (labels.empty()) throw std::invalid_argument("rejection_sample: target count must be positive");
  if (!(ceiling > 0.0)) throw std::invalid_argument("rejection_sample: M_max must be positive");
  std::vector<Draw> out;
  out.reserve(labels.size());
  RejectionStats st;
  std::size_t window_props = 0, window_accepts = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (;;) {
      Draw d = draw(labels[i], rng);
      const double r = ratio_of(d);
      const double u = rng.uniform();
      ++st.proposals;
      ++window_props;
      const bool accept = u * ceiling < r;
      if (accept) {
        ++st.accepted;
        ++window_accepts;
      }
      if (window_props == kCollapseWindow) {
        if (static_cast<double>(window_accepts) / static_cast<double>(kCollapseWindow) < kCollapseRate)
          throw NumericError("rejection_sample: acceptance rate fell below 1e-4 over " +
                             std::to_string(kCollapseWindow) +
                             " proposals; increase gamma or improve the density-ratio model");
        window_props = window_accepts = 0;
      }
      if (accept) {
        out.push_back(std::move(d));
        break;
      }
    }
  }
  if (stats) *stats = st;
  return out;
}

/// Samples |labels| pairs from `generator` through the density-ratio model;
/// every output is tagged fake_m1.
inline Dataset rejection_sample(const GeneratorHandle& generator, const DensityRatioModel& model,
                                const std::vector<Label>& labels, std::uint64_t seed,
                                RejectionStats* stats = nullptr) {
  auto draw = [&](const Label& y, Rng& rng) {
    if (const auto* o = std::get_if<CorruptedOracle>(&generator)) return draw_oracle(*o, y, rng).sample;
    return Sample{draw_cgan(std::get<TrainedCgan>(generator), y, rng), y, Provenance::fake_raw};
  };
  auto draws = rejection_sample_draws<Sample>(draw, [&](const Sample& s) { return ratio(model, s); }, model.ceiling,
                                              labels, seed, stats);
  Dataset ds(generator_task(generator), generator_dim(generator));
  ds.reserve(draws.size());
  for (auto& s : draws) {
    s.provenance = Provenance::fake_m1;
    ds.add(std::move(s));
  }
  return ds;
}

/// Oracle variant that keeps the ground truth of each accepted draw.
inline std::vector<OracleDraw> rejection_sample_oracle(const CorruptedOracle& oracle, const DensityRatioModel& model,
                                                       const std::vector<Label>& labels, std::uint64_t seed,
                                                       RejectionStats* stats = nullptr) {
  auto draws = rejection_sample_draws<OracleDraw>(
      [&](const Label& y, Rng& rng) { return draw_oracle(oracle, y, rng); },
      [&](const OracleDraw& d) { return ratio(model, d.sample); }, model.ceiling, labels, seed, stats);
  for (auto& d : draws) d.sample.provenance = Provenance::fake_m1;
  return draws;
}

inline void write_dr_model(const DensityRatioModel& m, std::ostream& os) {
  os << "cgankd-dr v1\n" << task_header(m.task) << "\ndim=" << m.dim << "\nprior_correction="
     << format_double(m.prior_correction) << "\nceiling=" << format_double(m.ceiling) << '\n';
  nn::write_params(m.net, os);
}

inline DensityRatioModel read_dr_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "cgankd-dr v1") throw FormatError("missing 'cgankd-dr v1' header");
  if (!std::getline(is, line)) throw FormatError("missing task header");
  const Task task = parse_task_header(line);
  auto kv = read_kv_block(is, 3);
  const auto dim = static_cast<std::size_t>(parse_int(kv_get(kv, "dim")));
  const double prior = parse_double(kv_get(kv, "prior_correction"));
  const double ceiling = parse_double(kv_get(kv, "ceiling"));
  auto net = nn::read_params(is);
  if (net.spec.input_dim() != dim + label_encoding_dim(task) || net.spec.output_dim() != 1)
    throw FormatError("density-ratio network shape does not match its header");
  if (!(ceiling > 0.0) || !(prior > 0.0)) throw FormatError("density-ratio constants must be positive");
  return DensityRatioModel{std::move(net), task, dim, prior, ceiling};
}

}  // namespace cgankd
