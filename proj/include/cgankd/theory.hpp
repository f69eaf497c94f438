#pragma once

// Exact, finite-support evaluation of the augmentation error bound
//
//   V(f_hat) - V(f*) <= 4 C_L R_hat + 2 C_L sqrt(4/N log(2/delta))
//                       + 4 C_L (1 - theta) TV(p_r, p_g^rho) + (V(f_s°) - V(f*))
//
// where N = N^r + M^g, theta = N^r / N and training pairs are i.i.d. from
// theta p_r + (1 - theta) p_g^rho. On a finite space every distribution is an
// explicit table, the hypothesis class is enumerated, and empirical risk
// minimization is brute force, so the only randomness left is the draw of the
// training set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgankd/rng.hpp"

namespace cgankd::theory {

struct Point {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Point&, const Point&) = default;
};

struct DiscreteJoint {
  std::vector<Point> support;
  std::vector<double> probs;

  void validate() const {
    if (support.size() != probs.size() || support.empty()) throw std::invalid_argument("DiscreteJoint: size mismatch");
    double s = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("DiscreteJoint: negative probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("DiscreteJoint: probabilities do not sum to 1");
  }

  std::map<Point, double> table() const {
    std::map<Point, double> t;
    for (std::size_t i = 0; i < support.size(); ++i) t[support[i]] += probs[i];
    return t;
  }

  /// Draws one support point by inverse CDF.
  Point draw(Rng& rng) const {
    const double u = rng.uniform();
    double c = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      c += probs[i];
      if (u < c) return support[i];
    }
    for (std::size_t i = probs.size(); i-- > 0;)
      if (probs[i] > 0) return support[i];
    return support.back();
  }
};

/// Half L1 distance over the union of supports.
inline double tv_distance(const DiscreteJoint& p, const DiscreteJoint& q) {
  p.validate();
  q.validate();
  auto tp = p.table();
  auto tq = q.table();
  for (const auto& [k, v] : tq) tp.try_emplace(k, 0.0);
  double s = 0.0;
  for (const auto& [k, v] : tp) {
    auto it = tq.find(k);
    s += std::abs(v - (it == tq.end() ? 0.0 : it->second));
  }
  return std::min(1.0, 0.5 * s);
}

/// A predictor maps each x index to a prediction.
using Predictor = std::vector<double>;
using FiniteHypothesisClass = std::vector<Predictor>;
using LossFn = std::function<double(double prediction, int y)>;

inline double zero_one_loss(double prediction, int y) { return std::lround(prediction) == y ? 0.0 : 1.0; }

/// Sum_i p_i loss(f(x_i), y_i); throws if any support loss exceeds C_L.
inline double exact_risk(const Predictor& f, const DiscreteJoint& joint, const LossFn& loss, double bound_c) {
  double r = 0.0;
  for (std::size_t i = 0; i < joint.support.size(); ++i) {
    const auto& pt = joint.support[i];
    if (pt.x < 0 || static_cast<std::size_t>(pt.x) >= f.size()) throw std::invalid_argument("exact_risk: predictor not total");
    const double l = loss(f[static_cast<std::size_t>(pt.x)], pt.y);
    if (l > bound_c) throw std::invalid_argument("exact_risk: loss exceeds C_L on the support (boundedness violated)");
    r += joint.probs[i] * l;
  }
  return r;
}

inline double empirical_risk(const Predictor& f, const std::vector<Point>& sample, const LossFn& loss) {
  double r = 0.0;
  for (const auto& p : sample) r += loss(f[static_cast<std::size_t>(p.x)], p.y);
  return r / static_cast<double>(sample.size());
}

struct RademacherEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

namespace detail {
inline std::vector<std::vector<double>> scaled_losses(const FiniteHypothesisClass& h, const std::vector<Point>& s,
                                                      const LossFn& loss, double bound_c) {
  std::vector<std::vector<double>> m(h.size(), std::vector<double>(s.size()));
  for (std::size_t f = 0; f < h.size(); ++f)
    for (std::size_t i = 0; i < s.size(); ++i) m[f][i] = loss(h[f][static_cast<std::size_t>(s[i].x)], s[i].y) / bound_c;
  return m;
}

inline double sup_correlation(const std::vector<std::vector<double>>& m, const std::vector<int>& sigma) {
  double best = 0.0;
  for (const auto& row : m) {
    double c = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) c += sigma[i] * row[i];
    best = std::max(best, std::abs(c));
  }
  return best / static_cast<double>(sigma.size());
}
}  // namespace detail

/// Monte Carlo estimate of E_sigma sup_f |(1/n) sum_i sigma_i loss_i(f) / C_L|.
/// The sign draws depend only on (seed, n, n_mc), so estimates for nested
/// classes share them.
inline RademacherEstimate empirical_rademacher(const FiniteHypothesisClass& h, const std::vector<Point>& samples,
                                               const LossFn& loss, double bound_c, std::size_t n_mc,
                                               std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("empirical_rademacher: empty sample set");
  if (n_mc == 0) throw std::invalid_argument("empirical_rademacher: n_mc must be >= 1");
  if (h.empty()) throw std::invalid_argument("empirical_rademacher: empty hypothesis class");
  const auto m = detail::scaled_losses(h, samples, loss, bound_c);
  Rng rng(derive_seed(seed, "rademacher"));
  std::vector<int> sigma(samples.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < n_mc; ++t) {
    for (auto& s : sigma) s = rng.sign();
    const double v = detail::sup_correlation(m, sigma);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(n_mc);
  const double var = n_mc > 1 ? std::max(0.0, (sum_sq - n_mc * mean * mean) / static_cast<double>(n_mc - 1)) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n_mc))};
}

/// Exact expectation over all 2^n sign vectors; n <= 16.
inline double exact_rademacher(const FiniteHypothesisClass& h, const std::vector<Point>& samples, const LossFn& loss,
                               double bound_c) {
  const std::size_t n = samples.size();
  if (n == 0 || n > 16) throw std::invalid_argument("exact_rademacher: needs 1 <= n <= 16");
  const auto m = detail::scaled_losses(h, samples, loss, bound_c);
  std::vector<int> sigma(n);
  double sum = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) sigma[i] = (mask >> i) & 1u ? 1 : -1;
    sum += detail::sup_correlation(m, sigma);
  }
  return sum / static_cast<double>(1u << n);
}

struct BoundInputs {
  double rademacher = 0.0;  // R_hat
  double bound_c = 1.0;     // C_L
  std::size_t n = 1;        // N^r + M^g
  double delta = 0.1;
  double theta = 1.0;
  double tv = 0.0;          // TV(p_r, p_g^rho)
  double approx_gap = 0.0;  // V(f_s°) - V(f*)
};

struct BoundReport {
  double bound_c = 1.0;
  double rademacher = 0.0;
  double complexity_term = 0.0;   // 4 C_L R_hat
  double statistical_term = 0.0;  // 2 C_L sqrt(4/N log(2/delta))
  double gap_term = 0.0;          // 4 C_L (1 - theta) TV
  double approx_term = 0.0;       // V(f_s°) - V(f*)
  double rhs = 0.0;
  double lhs = 0.0;               // V(f_hat) - V(f*), when measured
  bool holds = true;
};

inline BoundReport bound_rhs(const BoundInputs& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw std::invalid_argument("bound_rhs: delta must be in (0,1)");
  if (!(in.theta >= 0.0 && in.theta <= 1.0)) throw std::invalid_argument("bound_rhs: theta must be in [0,1]");
  if (in.n == 0) throw std::invalid_argument("bound_rhs: N must be positive");
  if (in.rademacher < 0 || in.bound_c <= 0 || in.tv < 0 || in.approx_gap < 0)
    throw std::invalid_argument("bound_rhs: inputs must be nonnegative");
  BoundReport r;
  r.bound_c = in.bound_c;
  r.rademacher = in.rademacher;
  r.complexity_term = 4.0 * in.bound_c * in.rademacher;
  r.statistical_term = 2.0 * in.bound_c * std::sqrt(4.0 / static_cast<double>(in.n) * std::log(2.0 / in.delta));
  r.gap_term = 4.0 * in.bound_c * (1.0 - in.theta) * in.tv;
  r.approx_term = in.approx_gap;
  r.rhs = r.complexity_term + r.statistical_term + r.gap_term + r.approx_term;
  return r;
}

// ---------------------------------------------------------------------------
// Discrete verification problem

/// Binary-label problem on x in {0, ..., x_points-1}.
struct DiscreteSetup {
  std::size_t x_points = 8;
  std::vector<double> px;              // real x marginal (empty: uniform)
  std::vector<double> eta;             // p_r(y=1 | x)
  std::vector<double> gen_px;          // generator x marginal (empty: px)
  double gen_flip = 0.0;               // generator flips the real label with this probability
  double m1_ceiling_fraction = 1.0;    // rejection envelope M = fraction * max ratio
  std::vector<double> teacher;         // p_t(y=1 | x) (empty: eta)
  double rho = 1.0;
  std::size_t n_real = 100;
  std::size_t m_fake = 100;
  std::size_t n_mc = 2000;
  bool rademacher_per_trial = true;
  double bound_c = 1.0;                // zero-one loss

  void validate() const {
    auto check_probs = [&](const std::vector<double>& v, const char* what, bool allow_empty) {
      if (v.empty() && allow_empty) return;
      if (v.size() != x_points) throw std::invalid_argument(std::string("setup: ") + what + " needs x_points entries");
      for (double p : v)
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("setup: ") + what + " entries must be in [0,1]");
    };
    if (x_points < 1) throw std::invalid_argument("setup: x_points must be positive");
    check_probs(px, "px", true);
    check_probs(eta, "eta", false);
    check_probs(gen_px, "gen_px", true);
    check_probs(teacher, "teacher", true);
    if (!(gen_flip >= 0.0 && gen_flip <= 1.0)) throw std::invalid_argument("setup: gen_flip must be in [0,1]");
    if (!(m1_ceiling_fraction > 0.0 && m1_ceiling_fraction <= 1.0))
      throw std::invalid_argument("setup: m1_ceiling_fraction must be in (0,1]");
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("setup: rho must be in (0,1]");
    if (n_real + m_fake == 0) throw std::invalid_argument("setup: N^r + M^g must be positive");
    if (n_mc == 0) throw std::invalid_argument("setup: n_mc must be positive");
  }

  std::vector<double> real_px() const {
    if (!px.empty()) return normalized(px);
    return std::vector<double>(x_points, 1.0 / static_cast<double>(x_points));
  }

  static std::vector<double> normalized(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    for (auto& x : v) x /= s;
    return v;
  }
};

inline DiscreteJoint joint_from(const std::vector<double>& px, const std::vector<double>& eta) {
  DiscreteJoint j;
  for (std::size_t x = 0; x < px.size(); ++x)
    for (int y = 0; y < 2; ++y) {
      j.support.push_back({static_cast<int>(x), y});
      j.probs.push_back(px[x] * (y == 1 ? eta[x] : 1.0 - eta[x]));
    }
  return j;
}

/// The four distributions of the discrete pipeline.
struct DiscretePipeline {
  DiscreteJoint real;       // p_r
  DiscreteJoint generator;  // p_g
  DiscreteJoint after_m1;   // p_g^s
  DiscreteJoint processed;  // p_g^rho
};

/// Exact distribution of each stage. M1 is conditional rejection sampling with
/// labels drawn from the real label marginal, acceptance min(r(x|y)/M, 1),
/// r = p_r(x|y) / p_g(x|y) and M = fraction * max r. M2 keeps, within each
/// class, the pairs whose teacher error -log p_t(y|x) is at most the
/// nearest-rank rho-quantile of that class's error distribution.
inline DiscretePipeline build_pipeline(const DiscreteSetup& s) {
  s.validate();
  const auto px = s.real_px();
  const auto gpx = s.gen_px.empty() ? px : DiscreteSetup::normalized(s.gen_px);
  std::vector<double> geta(s.x_points);
  for (std::size_t x = 0; x < s.x_points; ++x) geta[x] = s.eta[x] * (1.0 - s.gen_flip) + (1.0 - s.eta[x]) * s.gen_flip;
  DiscretePipeline out{joint_from(px, s.eta), joint_from(gpx, geta), {}, {}};
  const auto& pr = out.real;
  const auto& pg = out.generator;
  const std::size_t n = pr.support.size();

  // Class marginals and conditional ratios.
  double pr_y[2] = {0, 0}, pg_y[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    pr_y[pr.support[i].y] += pr.probs[i];
    pg_y[pg.support[i].y] += pg.probs[i];
  }
  std::vector<double> ratio(n, 0.0);
  double max_ratio = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = pr.support[i].y;
    const double num = pr_y[y] > 0 ? pr.probs[i] / pr_y[y] : 0.0;
    const double den = pg_y[y] > 0 ? pg.probs[i] / pg_y[y] : 0.0;
    ratio[i] = den > 0 ? num / den : 0.0;
    if (den > 0) max_ratio = std::max(max_ratio, ratio[i]);
  }
  const double ceiling = s.m1_ceiling_fraction * max_ratio;
  std::vector<double> m1(n, 0.0);
  double z[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = pr.support[i].y;
    const double cond = pg_y[y] > 0 ? pg.probs[i] / pg_y[y] : 0.0;
    m1[i] = cond * std::min(ratio[i] / ceiling, 1.0);
    z[y] += m1[i];
  }
  out.after_m1.support = pr.support;
  out.after_m1.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = pr.support[i].y;
    out.after_m1.probs[i] = z[y] > 0 ? pr_y[y] * m1[i] / z[y] : 0.0;
  }

  // Teacher filtering within each class.
  const auto& teacher = s.teacher.empty() ? s.eta : s.teacher;
  std::vector<double> err(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pt = pr.support[i];
    const double p = pt.y == 1 ? teacher[static_cast<std::size_t>(pt.x)] : 1.0 - teacher[static_cast<std::size_t>(pt.x)];
    err[i] = -std::log(std::max(p, 1e-12));
  }
  std::vector<double> kept(n, 0.0);
  for (int y = 0; y < 2; ++y) {
    std::vector<std::size_t> idx;
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (pr.support[i].y == y && out.after_m1.probs[i] > 0) {
        idx.push_back(i);
        mass += out.after_m1.probs[i];
      }
    if (idx.empty()) continue;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return err[a] < err[b]; });
    double alpha = err[idx.back()];
    double cum = 0.0;
    for (auto i : idx) {
      cum += out.after_m1.probs[i] / mass;
      if (cum >= s.rho - 1e-12) {
        alpha = err[i];
        break;
      }
    }
    for (auto i : idx)
      if (err[i] <= alpha) kept[i] = out.after_m1.probs[i];
  }
  double total = 0.0;
  for (double k : kept) total += k;
  out.processed.support = pr.support;
  out.processed.probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.processed.probs[i] = kept[i] / total;
  return out;
}

/// All single-threshold rules x >= t ? s : 1 - s, duplicates removed:
/// 2 * x_points distinct predictors.
inline FiniteHypothesisClass threshold_class(std::size_t x_points) {
  FiniteHypothesisClass h;
  for (std::size_t t = 0; t <= x_points; ++t)
    for (int s = 0; s < 2; ++s) {
      Predictor f(x_points);
      for (std::size_t x = 0; x < x_points; ++x) f[x] = x >= t ? s : 1 - s;
      if (std::find(h.begin(), h.end(), f) == h.end()) h.push_back(std::move(f));
    }
  return h;
}

struct TrialResult {
  std::size_t trial = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double rademacher = 0.0;
  bool holds = true;
};

struct VerifyReport {
  DiscretePipeline pipeline;
  double tv = 0.0;
  double theta = 1.0;
  double risk_bayes = 0.0;       // V(f*)
  double risk_best_class = 0.0;  // V(f_s°)
  BoundReport terms;             // terms of the last trial
  std::vector<TrialResult> trials;
  double holds_fraction = 0.0;
};

/// Empirical risk minimization on `trials` i.i.d. draws of D_aug ~ p_theta,
/// each checked against the bound at confidence 1 - delta.
inline VerifyReport verify_bound(const DiscreteSetup& s, std::size_t trials, double delta, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("verify_bound: trials must be positive");
  VerifyReport rep;
  rep.pipeline = build_pipeline(s);
  const auto& pr = rep.pipeline.real;
  const auto& pg = rep.pipeline.processed;
  const LossFn loss = zero_one_loss;
  rep.tv = tv_distance(pr, pg);
  const std::size_t n = s.n_real + s.m_fake;
  rep.theta = static_cast<double>(s.n_real) / static_cast<double>(n);
  DiscreteJoint mix{pr.support, std::vector<double>(pr.probs.size())};
  for (std::size_t i = 0; i < mix.probs.size(); ++i) mix.probs[i] = rep.theta * pr.probs[i] + (1 - rep.theta) * pg.probs[i];

  // Bayes predictor over all maps x -> {0,1}.
  Predictor bayes(s.x_points, 0.0);
  for (std::size_t x = 0; x < s.x_points; ++x) {
    double r0 = 0, r1 = 0;
    for (std::size_t i = 0; i < pr.support.size(); ++i)
      if (static_cast<std::size_t>(pr.support[i].x) == x) {
        r0 += pr.probs[i] * loss(0.0, pr.support[i].y);
        r1 += pr.probs[i] * loss(1.0, pr.support[i].y);
      }
    bayes[x] = r1 < r0 ? 1.0 : 0.0;
  }
  rep.risk_bayes = exact_risk(bayes, pr, loss, s.bound_c);
  const auto h = threshold_class(s.x_points);
  std::vector<double> true_risk(h.size());
  for (std::size_t f = 0; f < h.size(); ++f) true_risk[f] = exact_risk(h[f], pr, loss, s.bound_c);
  rep.risk_best_class = *std::min_element(true_risk.begin(), true_risk.end());

  auto draw_sample = [&](std::uint64_t stream) {
    Rng rng(stream);
    std::vector<Point> sample(n);
    for (auto& p : sample) p = mix.draw(rng);
    return sample;
  };
  double fixed_rademacher = 0.0;
  if (!s.rademacher_per_trial)
    fixed_rademacher =
        empirical_rademacher(h, draw_sample(derive_seed(seed, "rademacher.sample")), loss, s.bound_c, s.n_mc, seed).value;

  std::size_t held = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t ts = derive_seed(seed, static_cast<std::uint64_t>(t));
    const auto sample = draw_sample(ts);
    std::size_t best = 0;
    double best_risk = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < h.size(); ++f) {
      const double r = empirical_risk(h[f], sample, loss);
      if (r < best_risk) {
        best_risk = r;
        best = f;
      }
    }
    const double rad = s.rademacher_per_trial ? empirical_rademacher(h, sample, loss, s.bound_c, s.n_mc, ts).value
                                              : fixed_rademacher;
    auto b = bound_rhs({rad, s.bound_c, n, delta, rep.theta, rep.tv, rep.risk_best_class - rep.risk_bayes});
    b.lhs = true_risk[best] - rep.risk_bayes;
    b.holds = b.lhs <= b.rhs;
    held += b.holds ? 1 : 0;
    rep.trials.push_back({t, b.lhs, b.rhs, rad, b.holds});
    rep.terms = b;
  }
  rep.holds_fraction = static_cast<double>(held) / static_cast<double>(trials);
  return rep;
}

}  // namespace cgankd::theory
