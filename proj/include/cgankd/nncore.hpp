#pragma once

// Minimal fully connected networks: forward/backward passes, temperature
// softmax, classification/regression/distillation losses, momentum SGD and
// evaluation metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgankd/common.hpp"
#include "cgankd/dataset.hpp"
#include "cgankd/rng.hpp"

namespace cgankd::nn {

/// Lower bound applied to probabilities before taking a logarithm.
inline constexpr double kProbFloor = 1e-12;

enum class OutputKind {
  logits,         // C >= 2 unbounded class scores
  nonneg_scalar,  // one output passed through ReLU
  linear,         // k unbounded outputs (generators, binary discriminators)
};

class NetSpec {
 public:
  NetSpec(std::size_t input_dim, std::vector<std::size_t> hidden_widths, OutputKind kind, std::size_t outputs = 1)
      : input_dim_(input_dim), hidden_(std::move(hidden_widths)), kind_(kind), outputs_(outputs) {
    if (input_dim_ == 0) throw std::invalid_argument("NetSpec: input_dim must be positive");
    if (hidden_.empty()) throw std::invalid_argument("NetSpec: hidden_widths must be non-empty");
    for (auto w : hidden_)
      if (w == 0) throw std::invalid_argument("NetSpec: hidden widths must be positive");
    if (kind_ == OutputKind::logits && outputs_ < 2) throw std::invalid_argument("NetSpec: logits need C >= 2");
    if (kind_ == OutputKind::nonneg_scalar && outputs_ != 1)
      throw std::invalid_argument("NetSpec: nonneg_scalar has exactly one output");
    if (outputs_ == 0) throw std::invalid_argument("NetSpec: outputs must be positive");
  }

  static NetSpec classifier(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes) {
    return NetSpec(in, std::move(hidden), OutputKind::logits, classes);
  }
  static NetSpec regressor(std::size_t in, std::vector<std::size_t> hidden) {
    return NetSpec(in, std::move(hidden), OutputKind::nonneg_scalar, 1);
  }
  static NetSpec linear(std::size_t in, std::vector<std::size_t> hidden, std::size_t outputs) {
    return NetSpec(in, std::move(hidden), OutputKind::linear, outputs);
  }

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& hidden_widths() const { return hidden_; }
  OutputKind output_kind() const { return kind_; }
  std::size_t output_dim() const { return outputs_; }

  /// Layer widths including input and output: {in, h1, ..., out}.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_dim_};
    w.insert(w.end(), hidden_.begin(), hidden_.end());
    w.push_back(outputs_);
    return w;
  }

  friend bool operator==(const NetSpec&, const NetSpec&) = default;

 private:
  std::size_t input_dim_;
  std::vector<std::size_t> hidden_;
  OutputKind kind_;
  std::size_t outputs_;
};

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // row-major out x in
  std::vector<double> bias;

  double& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetParams {
  NetSpec spec;
  std::vector<Layer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Visits every scalar parameter in a fixed order.
  template <class F>
  void for_each(F&& f) {
    for (auto& l : layers) {
      for (auto& v : l.weight) f(v);
      for (auto& v : l.bias) f(v);
    }
  }
  template <class F>
  void for_each(F&& f) const {
    for (const auto& l : layers) {
      for (double v : l.weight) f(v);
      for (double v : l.bias) f(v);
    }
  }

  bool finite() const {
    bool ok = true;
    for_each([&](double v) { ok = ok && std::isfinite(v); });
    return ok;
  }

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Gradients share the parameter layout.
using Gradients = NetParams;

inline NetParams zeros_like(const NetSpec& spec) {
  NetParams p{spec, {}};
  const auto w = spec.widths();
  for (std::size_t k = 0; k + 1 < w.size(); ++k)
    p.layers.push_back(Layer{w[k], w[k + 1], std::vector<double>(w[k] * w[k + 1], 0.0), std::vector<double>(w[k + 1], 0.0)});
  return p;
}

/// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
inline NetParams init_params(const NetSpec& spec, std::uint64_t seed) {
  NetParams p = zeros_like(spec);
  Rng rng(derive_seed(seed, "init"));
  for (auto& l : p.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (auto& v : l.weight) v = rng.uniform(-scale, scale);
  }
  return p;
}

/// Per-layer pre- and post-activation values kept for backpropagation.
struct Activations {
  std::vector<std::vector<double>> pre;   // one per layer
  std::vector<std::vector<double>> post;  // post[0] is the input
};

inline void check_input(const NetParams& p, std::span<const double> x) {
  if (x.size() != p.spec.input_dim())
    throw std::invalid_argument("forward: input length " + std::to_string(x.size()) + " != " +
                                std::to_string(p.spec.input_dim()));
}

inline const std::vector<double>& forward(const NetParams& p, std::span<const double> x, Activations& a) {
  check_input(p, x);
  const std::size_t L = p.layers.size();
  a.pre.resize(L);
  a.post.resize(L + 1);
  a.post[0].assign(x.begin(), x.end());
  for (std::size_t k = 0; k < L; ++k) {
    const Layer& l = p.layers[k];
    auto& z = a.pre[k];
    auto& h = a.post[k + 1];
    const auto& in = a.post[k];
    z.resize(l.out);
    h.resize(l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
      double s = l.bias[o];
      const double* row = &l.weight[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) s += row[i] * in[i];
      z[o] = s;
    }
    const bool relu = k + 1 < L || p.spec.output_kind() == OutputKind::nonneg_scalar;
    for (std::size_t o = 0; o < l.out; ++o) h[o] = relu ? std::max(z[o], 0.0) : z[o];
  }
  return a.post[L];
}

inline std::vector<double> forward(const NetParams& p, std::span<const double> x) {
  Activations a;
  return forward(p, x, a);
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
/// When `dinput` is non-null it receives d(loss)/d(input).
inline void backward(const NetParams& p, const Activations& a, std::span<const double> dout, Gradients& grad,
                     std::vector<double>* dinput = nullptr) {
  const std::size_t L = p.layers.size();
  std::vector<double> delta(dout.begin(), dout.end());
  std::vector<double> next;
  for (std::size_t k = L; k-- > 0;) {
    const Layer& l = p.layers[k];
    Layer& g = grad.layers[k];
    const bool relu = k + 1 < L || p.spec.output_kind() == OutputKind::nonneg_scalar;
    if (relu)
      for (std::size_t o = 0; o < l.out; ++o)
        if (a.pre[k][o] <= 0.0) delta[o] = 0.0;
    const auto& in = a.post[k];
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      g.bias[o] += d;
      if (d == 0.0) continue;
      double* grow = &g.weight[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) grow[i] += d * in[i];
    }
    if (k == 0 && dinput == nullptr) break;
    next.assign(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = &l.weight[o * l.in];
      for (std::size_t i = 0; i < l.in; ++i) next[i] += d * row[i];
    }
    delta.swap(next);
  }
  if (dinput) *dinput = delta;
}

// ---------------------------------------------------------------------------
// Softmax and losses

struct SoftLabel {
  std::vector<double> probs;
};

/// p_c = exp(l_c / T) / sum_k exp(l_k / T), evaluated after subtracting max(l).
inline std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp((logits[c] - m) / temperature);
    sum += p[c];
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline SoftLabel soft_labels(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("soft_labels: temperature must be positive");
  if (logits.empty()) throw std::invalid_argument("soft_labels: empty logits");
  for (double l : logits)
    if (!std::isfinite(l)) throw NumericError("soft_labels: non-finite logit");
  return SoftLabel{softmax(logits, temperature)};
}

/// sum_c -target_c * log(max(p_c, floor)).
inline double cross_entropy(std::span<const double> target, std::span<const double> probs) {
  double s = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c)
    if (target[c] != 0.0) s -= target[c] * std::log(std::max(probs[c], kProbFloor));
  return s;
}

enum class LossKind { plain_ce, plain_se, blkd, logistic };

struct LossSpec {
  LossKind kind = LossKind::plain_ce;
  double lambda_kd = 0.5;   // blkd only
  double temperature = 5.0; // blkd only

  static LossSpec ce() { return {LossKind::plain_ce, 0.0, 1.0}; }
  static LossSpec se() { return {LossKind::plain_se, 0.0, 1.0}; }
  static LossSpec logistic() { return {LossKind::logistic, 0.0, 1.0}; }
  static LossSpec blkd(double lambda, double temperature) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("blkd: lambda_kd must be in [0,1]");
    if (!(temperature > 0.0)) throw std::invalid_argument("blkd: temperature must be positive");
    return {LossKind::blkd, lambda, temperature};
  }

  double effective_temperature() const { return kind == LossKind::blkd ? temperature : 1.0; }
};

/// Supervision for one example. `cls` for class targets, `value` for scalar and
/// logistic targets, `teacher_soft` for blkd.
struct Target {
  int cls = -1;
  double value = 0.0;
  std::vector<double> teacher_soft;
};

inline std::vector<double> one_hot(int cls, std::size_t classes) {
  std::vector<double> v(classes, 0.0);
  v[static_cast<std::size_t>(cls)] = 1.0;
  return v;
}

/// Loss of a single prediction (network output) against its target.
inline double loss_value(const LossSpec& loss, std::span<const double> output, const Target& t) {
  switch (loss.kind) {
    case LossKind::plain_ce: {
      const auto p = softmax(output, 1.0);
      return -std::log(std::max(p[static_cast<std::size_t>(t.cls)], kProbFloor));
    }
    case LossKind::blkd: {
      if (t.teacher_soft.size() != output.size()) throw std::invalid_argument("blkd: teacher soft label required");
      const auto p = softmax(output, loss.temperature);
      const double ls = -std::log(std::max(p[static_cast<std::size_t>(t.cls)], kProbFloor));
      const double lkd = cross_entropy(t.teacher_soft, p);
      return (1.0 - loss.lambda_kd) * ls + loss.lambda_kd * lkd;
    }
    case LossKind::plain_se: {
      const double d = output[0] - t.value;
      return d * d;
    }
    case LossKind::logistic: {
      const double z = output[0];
      return std::max(z, 0.0) - t.value * z + std::log1p(std::exp(-std::abs(z)));
    }
  }
  return 0.0;
}

/// d(loss_value)/d(output), exact including the probability floor.
inline std::vector<double> loss_output_grad(const LossSpec& loss, std::span<const double> output, const Target& t) {
  std::vector<double> g(output.size(), 0.0);
  switch (loss.kind) {
    case LossKind::plain_ce:
    case LossKind::blkd: {
      const double T = loss.effective_temperature();
      const auto p = softmax(output, T);
      // Blended target weights: L = sum_c -w_c log p_c.
      std::vector<double> w(output.size(), 0.0);
      if (loss.kind == LossKind::plain_ce) {
        w[static_cast<std::size_t>(t.cls)] = 1.0;
      } else {
        for (std::size_t c = 0; c < w.size(); ++c) w[c] = loss.lambda_kd * t.teacher_soft[c];
        w[static_cast<std::size_t>(t.cls)] += 1.0 - loss.lambda_kd;
      }
      double active = 0.0;
      for (std::size_t c = 0; c < w.size(); ++c)
        if (p[c] >= kProbFloor) active += w[c];
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = (p[k] * active - (p[k] >= kProbFloor ? w[k] : 0.0)) / T;
      break;
    }
    case LossKind::plain_se:
      g[0] = 2.0 * (output[0] - t.value);
      break;
    case LossKind::logistic: {
      const double z = output[0];
      const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      g[0] = s - t.value;
      break;
    }
  }
  return g;
}

struct Example {
  std::vector<double> input;
  Target target;
};

/// Mean loss over `batch` and its exact gradient with respect to the parameters.
inline double gradients(const NetParams& p, std::span<const Example* const> batch, const LossSpec& loss,
                        Gradients& grad) {
  if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
  if (grad.layers.size() != p.layers.size())
    grad = zeros_like(p.spec);
  else
    grad.for_each([](double& v) { v = 0.0; });
  Activations a;
  double total = 0.0;
  for (const Example* e : batch) {
    const auto& out = forward(p, e->input, a);
    total += loss_value(loss, out, e->target);
    const auto dout = loss_output_grad(loss, out, e->target);
    backward(p, a, dout, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grad.for_each([&](double& v) { v *= inv; });
  return total * inv;
}

inline double gradients(const NetParams& p, std::span<const Example> batch, const LossSpec& loss, Gradients& grad) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& e : batch) ptrs.push_back(&e);
  return gradients(p, std::span<const Example* const>(ptrs), loss, grad);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  std::vector<std::size_t> lr_decay_epochs;  // lr *= lr_decay_factor at the start of each listed epoch
  double lr_decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  LossSpec loss = LossSpec::ce();

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
    if (loss.kind == LossKind::blkd) (void)LossSpec::blkd(loss.lambda_kd, loss.temperature);
  }

  double learning_rate_at(std::size_t epoch) const {
    double lr = learning_rate;
    for (auto e : lr_decay_epochs)
      if (epoch >= e) lr *= lr_decay_factor;
    return lr;
  }
};

/// Momentum SGD in the heavy-ball form v <- mu v + g, w <- w - lr v.
class SgdMomentum {
 public:
  SgdMomentum(const NetSpec& spec, double momentum, double weight_decay)
      : velocity_(zeros_like(spec)), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(NetParams& p, const Gradients& g, double lr) {
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
      update(p.layers[k].weight, g.layers[k].weight, velocity_.layers[k].weight, lr);
      update(p.layers[k].bias, g.layers[k].bias, velocity_.layers[k].bias, lr);
    }
  }

 private:
  void update(std::vector<double>& w, const std::vector<double>& g, std::vector<double>& v, double lr) const {
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i] + weight_decay_ * w[i];
      w[i] -= lr * v[i];
    }
  }

  Gradients velocity_;
  double momentum_;
  double weight_decay_;
};

struct TrainResult {
  NetParams params;
  std::vector<double> loss_history;  // mean training loss per epoch
};

/// Shuffled mini-batch SGD. Epoch e visits examples in a permutation drawn from
/// the sub-stream (seed, "shuffle", e).
inline TrainResult train_examples(NetParams params, const std::vector<Example>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  SgdMomentum opt(params.spec, cfg.momentum, cfg.weight_decay);
  TrainResult result{std::move(params), {}};
  std::vector<std::size_t> order(data.size());
  std::vector<const Example*> batch;
  Gradients grad = zeros_like(result.params.spec);
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    const double lr = cfg.learning_rate_at(epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
      const double l = gradients(result.params, std::span<const Example* const>(batch), cfg.loss, grad);
      if (!std::isfinite(l)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += l * static_cast<double>(batch.size());
      opt.step(result.params, grad, lr);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

inline void check_task(const NetSpec& spec, const Task& task) {
  if (task.is_classification()) {
    if (spec.output_kind() != OutputKind::logits || spec.output_dim() != static_cast<std::size_t>(task.classes))
      throw std::invalid_argument("network output does not match a " + std::to_string(task.classes) +
                                  "-class classification task");
  } else if (spec.output_kind() != OutputKind::nonneg_scalar) {
    throw std::invalid_argument("regression requires a nonneg_scalar network");
  }
}

/// Converts a dataset into training examples. BLKD targets carry the teacher's
/// soft labels at the loss temperature, computed for every sample.
inline std::vector<Example> make_examples(const Dataset& ds, const LossSpec& loss, const NetParams* teacher) {
  const bool blkd = loss.kind == LossKind::blkd;
  if (blkd != (teacher != nullptr)) throw std::invalid_argument("a teacher is required iff loss_kind is blkd");
  if (blkd && !ds.task().is_classification()) throw std::invalid_argument("blkd applies to classification only");
  if (teacher) check_task(teacher->spec, ds.task());
  std::vector<Example> ex;
  ex.reserve(ds.size());
  Activations a;
  for (const auto& s : ds) {
    Example e{s.features, {}};
    if (ds.task().is_classification())
      e.target.cls = class_of(s.label);
    else
      e.target.value = value_of(s.label);
    if (blkd) e.target.teacher_soft = soft_labels(forward(*teacher, s.features, a), loss.temperature).probs;
    ex.push_back(std::move(e));
  }
  return ex;
}

inline TrainResult train(NetParams params, const Dataset& ds, const TrainConfig& cfg,
                         const NetParams* teacher = nullptr) {
  if (ds.empty()) throw std::invalid_argument("train: empty dataset");
  check_task(params.spec, ds.task());
  if (ds.task().is_classification() == (cfg.loss.kind == LossKind::plain_se))
    throw std::invalid_argument("train: loss kind does not match the task");
  return train_examples(std::move(params), make_examples(ds, cfg.loss, teacher), cfg);
}

struct Metrics {
  std::optional<double> top1;  // classification
  std::optional<double> mae;   // regression, in unnormalized label units
  std::size_t sample_count = 0;

  /// Higher-is-better score: top1, or -mae.
  double score() const { return top1 ? *top1 : -*mae; }
  /// The reported number: top1 or mae.
  double value() const { return top1 ? *top1 : *mae; }
};

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline Metrics evaluate(const NetParams& p, const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("evaluate: empty dataset");
  check_task(p.spec, ds.task());
  Activations a;
  Metrics m;
  m.sample_count = ds.size();
  const Task& task = ds.task();
  double acc = 0.0;
  for (const auto& s : ds) {
    const auto& out = forward(p, s.features, a);
    if (task.is_classification())
      acc += argmax(out) == static_cast<std::size_t>(class_of(s.label)) ? 1.0 : 0.0;
    else
      acc += std::abs(task.unnormalize(out[0]) - task.unnormalize(value_of(s.label)));
  }
  acc /= static_cast<double>(ds.size());
  if (task.is_classification())
    m.top1 = acc;
  else
    m.mae = acc;
  return m;
}

// ---------------------------------------------------------------------------
// Text serialization shared by generator and density-ratio checkpoints.

inline const char* to_string(OutputKind k) {
  switch (k) {
    case OutputKind::logits: return "logits";
    case OutputKind::nonneg_scalar: return "nonneg_scalar";
    case OutputKind::linear: return "linear";
  }
  return "?";
}

inline OutputKind parse_output_kind(std::string_view s) {
  if (s == "logits") return OutputKind::logits;
  if (s == "nonneg_scalar") return OutputKind::nonneg_scalar;
  if (s == "linear") return OutputKind::linear;
  throw FormatError("unknown output kind '" + std::string(s) + "'");
}

inline void write_params(const NetParams& p, std::ostream& os) {
  const auto& s = p.spec;
  os << "net in=" << s.input_dim() << " out=" << s.output_dim() << " kind=" << to_string(s.output_kind()) << " hidden=";
  for (std::size_t i = 0; i < s.hidden_widths().size(); ++i) os << (i ? "," : "") << s.hidden_widths()[i];
  os << '\n';
  for (const auto& l : p.layers) {
    os << "W " << join_doubles(l.weight) << '\n';
    os << "b " << join_doubles(l.bias) << '\n';
  }
}

inline NetParams read_params(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("missing net header");
  auto f = split_view(trim(line), ' ');
  if (f.size() != 5 || f[0] != "net") throw FormatError("malformed net header: '" + line + "'");
  auto val = [&](std::size_t i, std::string_view key) {
    if (f[i].substr(0, key.size()) != key) throw FormatError("malformed net header: '" + line + "'");
    return f[i].substr(key.size());
  };
  const auto in = static_cast<std::size_t>(parse_int(val(1, "in=")));
  const auto out = static_cast<std::size_t>(parse_int(val(2, "out=")));
  const auto kind = parse_output_kind(val(3, "kind="));
  std::vector<std::size_t> hidden;
  for (auto h : split_view(val(4, "hidden="), ',')) hidden.push_back(static_cast<std::size_t>(parse_int(h)));
  NetParams p = zeros_like(NetSpec(in, hidden, kind, out));
  for (auto& l : p.layers) {
    for (auto* target : {&l.weight, &l.bias}) {
      if (!std::getline(is, line)) throw FormatError("truncated net parameters");
      auto t = trim(line);
      if (t.size() < 2) throw FormatError("malformed parameter row");
      auto values = parse_doubles(t.substr(2));
      if (values.size() != target->size()) throw FormatError("parameter row has wrong length");
      *target = std::move(values);
    }
  }
  if (!p.finite()) throw FormatError("non-finite parameter");
  return p;
}

}  // namespace cgankd::nn
