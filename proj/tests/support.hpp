#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgankd/nncore.hpp"
#include "cgankd/rng.hpp"

namespace cgankd::testing {

#ifndef CGANKD_SOURCE_DIR
#define CGANKD_SOURCE_DIR "."
#endif

inline std::string source_path(const std::string& rel) { return std::string(CGANKD_SOURCE_DIR) + "/" + rel; }

/// A random network, a loss that fits its output kind, and a batch.
struct GradCase {
  nn::NetParams params;
  nn::LossSpec loss;
  std::vector<nn::Example> batch;
};

inline GradCase random_grad_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = 1 + rng.below(5);
  std::vector<std::size_t> hidden(1 + rng.below(3));
  for (auto& h : hidden) h = 2 + rng.below(7);
  const int kind = static_cast<int>(rng.below(5));  // ce, blkd, se, logistic, multi-output blkd
  const std::size_t classes = 2 + rng.below(4);
  nn::NetSpec spec = kind == 2   ? nn::NetSpec::regressor(in, hidden)
                     : kind == 3 ? nn::NetSpec::linear(in, hidden, 1)
                                 : nn::NetSpec::classifier(in, hidden, classes);
  nn::LossSpec loss = kind == 0   ? nn::LossSpec::ce()
                      : kind == 2 ? nn::LossSpec::se()
                      : kind == 3 ? nn::LossSpec::logistic()
                                  : nn::LossSpec::blkd(rng.uniform(), 0.5 + 9.5 * rng.uniform());
  GradCase c{nn::init_params(spec, rng.next_u64()), loss, {}};
  // Larger-than-default weights keep regressor outputs off the ReLU floor.
  c.params.for_each([&](double& w) { w = rng.normal(0.0, 0.8); });
  const std::size_t n = 1 + rng.below(8);
  for (std::size_t i = 0; i < n; ++i) {
    nn::Example e;
    e.input.resize(in);
    for (auto& x : e.input) x = rng.normal();
    if (kind == 2) {
      e.target.value = rng.uniform();
    } else if (kind == 3) {
      e.target.value = rng.bernoulli(0.5) ? 1.0 : 0.0;
    } else {
      e.target.cls = static_cast<int>(rng.below(classes));
      if (loss.kind == nn::LossKind::blkd) {
        std::vector<double> logits(classes);
        for (auto& l : logits) l = rng.normal(0.0, 2.0);
        e.target.teacher_soft = nn::softmax(logits, loss.temperature);
      }
    }
    c.batch.push_back(std::move(e));
  }
  return c;
}

inline double batch_loss(const nn::NetParams& p, const std::vector<nn::Example>& batch, const nn::LossSpec& loss) {
  double s = 0.0;
  nn::Activations a;
  for (const auto& e : batch) s += nn::loss_value(loss, nn::forward(p, e.input, a), e.target);
  return s / static_cast<double>(batch.size());
}

/// ||analytic - central difference||_2 / max(||analytic||_2, ||fd||_2, 1e-8).
inline double gradient_relative_error(const GradCase& c, double h = 1e-6) {
  nn::Gradients g = nn::zeros_like(c.params.spec);
  nn::gradients(c.params, std::span<const nn::Example>(c.batch), c.loss, g);
  std::vector<double> analytic;
  g.for_each([&](double v) { analytic.push_back(v); });
  std::vector<double*> slots;
  nn::NetParams p = c.params;
  p.for_each([&](double& v) { slots.push_back(&v); });
  double diff = 0.0, na = 0.0, nf = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double w = *slots[i];
    *slots[i] = w + h;
    const double up = batch_loss(p, c.batch, c.loss);
    *slots[i] = w - h;
    const double down = batch_loss(p, c.batch, c.loss);
    *slots[i] = w;
    const double fd = (up - down) / (2.0 * h);
    diff += (fd - analytic[i]) * (fd - analytic[i]);
    na += analytic[i] * analytic[i];
    nf += fd * fd;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nf), 1e-8});
}

}  // namespace cgankd::testing
