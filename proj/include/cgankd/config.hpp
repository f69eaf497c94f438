#pragma once

// Flat `key=value` configuration text with dotted section prefixes.
// Blank lines and lines starting with '#' are ignored; every key may appear at
// most once and unknown keys are rejected. `snapshot()` writes every key in a
// fixed order, so loading a snapshot reproduces the configuration exactly.

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cgankd/common.hpp"
#include "cgankd/distill.hpp"
#include "cgankd/theory.hpp"

namespace cgankd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses config text; `source` prefixes error messages.
inline KeyValues parse_key_values(std::istream& is, const std::string& source = "config") {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  return parse_key_values(is, path);
}

namespace detail {

inline std::vector<std::size_t> parse_sizes(std::string_view s) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (auto part : split_view(s, ',')) {
    const auto v = parse_int(part);
    if (v < 0) throw FormatError("expected a nonnegative integer, got '" + std::string(part) + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw FormatError("expected true or false, got '" + std::string(s) + "'");
}

inline std::size_t parse_size(std::string_view s) {
  const auto v = parse_int(s);
  if (v < 0) throw FormatError("expected a nonnegative integer, got '" + std::string(s) + "'");
  return static_cast<std::size_t>(v);
}

template <class Cfg>
struct Field {
  std::string key;
  std::function<bool(const Cfg&)> applies;
  std::function<void(Cfg&, std::string_view)> set;
  std::function<std::string(const Cfg&)> get;
};

template <class Cfg>
inline bool always(const Cfg&) { return true; }

// Field builders over a member accessor `ref(cfg) -> T&`.
template <class Cfg, class Ref>
Field<Cfg> size_field(std::string key, Ref ref, std::function<bool(const Cfg&)> ap = always<Cfg>) {
  return {std::move(key), ap, [ref](Cfg& c, std::string_view v) { ref(c) = parse_size(v); },
          [ref](const Cfg& c) { return std::to_string(ref(const_cast<Cfg&>(c))); }};
}
template <class Cfg, class Ref>
Field<Cfg> u64_field(std::string key, Ref ref, std::function<bool(const Cfg&)> ap = always<Cfg>) {
  return {std::move(key), ap, [ref](Cfg& c, std::string_view v) { ref(c) = parse_u64(v); },
          [ref](const Cfg& c) { return std::to_string(ref(const_cast<Cfg&>(c))); }};
}
template <class Cfg, class Ref>
Field<Cfg> double_field(std::string key, Ref ref, std::function<bool(const Cfg&)> ap = always<Cfg>) {
  return {std::move(key), ap, [ref](Cfg& c, std::string_view v) { ref(c) = parse_double(v); },
          [ref](const Cfg& c) { return format_double(ref(const_cast<Cfg&>(c))); }};
}
template <class Cfg, class Ref>
Field<Cfg> bool_field(std::string key, Ref ref, std::function<bool(const Cfg&)> ap = always<Cfg>) {
  return {std::move(key), ap, [ref](Cfg& c, std::string_view v) { ref(c) = parse_bool(v); },
          [ref](const Cfg& c) { return std::string(ref(const_cast<Cfg&>(c)) ? "true" : "false"); }};
}
template <class Cfg, class Ref>
Field<Cfg> sizes_field(std::string key, Ref ref, std::function<bool(const Cfg&)> ap = always<Cfg>) {
  return {std::move(key), ap, [ref](Cfg& c, std::string_view v) { ref(c) = parse_sizes(v); },
          [ref](const Cfg& c) { return join_sizes(ref(const_cast<Cfg&>(c))); }};
}
template <class Cfg, class Ref>
Field<Cfg> doubles_field(std::string key, Ref ref, std::function<bool(const Cfg&)> ap = always<Cfg>) {
  return {std::move(key), ap,
          [ref](Cfg& c, std::string_view v) { ref(c) = trim(v).empty() ? std::vector<double>{} : parse_doubles(v, ','); },
          [ref](const Cfg& c) { return join_doubles(ref(const_cast<Cfg&>(c)), ','); }};
}

template <class Cfg>
void add_train_fields(std::vector<Field<Cfg>>& f, const std::string& prefix,
                      std::function<nn::TrainConfig&(Cfg&)> tc) {
  f.push_back(size_field<Cfg>(prefix + "epochs", [tc](Cfg& c) -> auto& { return tc(c).epochs; }));
  f.push_back(size_field<Cfg>(prefix + "batch_size", [tc](Cfg& c) -> auto& { return tc(c).batch_size; }));
  f.push_back(double_field<Cfg>(prefix + "lr", [tc](Cfg& c) -> auto& { return tc(c).learning_rate; }));
  f.push_back(sizes_field<Cfg>(prefix + "lr_decay_epochs", [tc](Cfg& c) -> auto& { return tc(c).lr_decay_epochs; }));
  f.push_back(double_field<Cfg>(prefix + "lr_decay_factor", [tc](Cfg& c) -> auto& { return tc(c).lr_decay_factor; }));
  f.push_back(double_field<Cfg>(prefix + "momentum", [tc](Cfg& c) -> auto& { return tc(c).momentum; }));
  f.push_back(double_field<Cfg>(prefix + "weight_decay", [tc](Cfg& c) -> auto& { return tc(c).weight_decay; }));
}

inline bool is_blobs(const PipelineConfig& c) { return std::holds_alternative<BlobsFamily>(c.data.family); }
inline bool is_ring(const PipelineConfig& c) { return std::holds_alternative<RingFamily>(c.data.family); }
inline BlobsFamily& blobs(PipelineConfig& c) { return std::get<BlobsFamily>(c.data.family); }
inline RingFamily& ring(PipelineConfig& c) { return std::get<RingFamily>(c.data.family); }

inline const std::vector<Field<PipelineConfig>>& pipeline_fields() {
  using C = PipelineConfig;
  static const std::vector<Field<C>> fields = [] {
    std::vector<Field<C>> f;
    f.push_back(u64_field<C>("seed", [](C& c) -> auto& { return c.seed; }));
    f.push_back({"data.family", always<C>,
                 [](C& c, std::string_view v) {
                   if (v == "blobs") c.data.family = BlobsFamily{};
                   else if (v == "ring") c.data.family = RingFamily{};
                   else throw FormatError("expected blobs or ring, got '" + std::string(v) + "'");
                 },
                 [](const C& c) { return std::string(is_blobs(c) ? "blobs" : "ring"); }});
    f.push_back(size_field<C>("data.dim", [](C& c) -> auto& { return c.data.dim; }));
    f.push_back(size_field<C>("data.n_real", [](C& c) -> auto& { return c.data.n; }));
    f.push_back(size_field<C>("data.n_test", [](C& c) -> auto& { return c.n_test; }));
    f.push_back({"data.classes", is_blobs, [](C& c, std::string_view v) { blobs(c).classes = static_cast<int>(parse_int(v)); },
                 [](const C& c) { return std::to_string(std::get<BlobsFamily>(c.data.family).classes); }});
    f.push_back(double_field<C>("data.separation", [](C& c) -> auto& { return blobs(c).separation; }, is_blobs));
    f.push_back(double_field<C>("data.noise_std", [](C& c) -> auto& {
      return is_blobs(c) ? blobs(c).noise_std : ring(c).noise_std;
    }));
    f.push_back(double_field<C>("data.radius_base", [](C& c) -> auto& { return ring(c).radius_base; }, is_ring));
    f.push_back(double_field<C>("data.radius_slope", [](C& c) -> auto& { return ring(c).radius_slope; }, is_ring));
    f.push_back(double_field<C>("data.label_lo", [](C& c) -> auto& { return ring(c).label_lo; }, is_ring));
    f.push_back(double_field<C>("data.label_hi", [](C& c) -> auto& { return ring(c).label_hi; }, is_ring));

    f.push_back({"generator.kind", always<C>,
                 [](C& c, std::string_view v) {
                   if (v == "oracle") c.generator.kind = GeneratorKind::oracle;
                   else if (v == "cgan") c.generator.kind = GeneratorKind::cgan;
                   else throw FormatError("expected oracle or cgan, got '" + std::string(v) + "'");
                 },
                 [](const C& c) { return std::string(c.generator.kind == GeneratorKind::oracle ? "oracle" : "cgan"); }});
    f.push_back(double_field<C>("generator.label_noise", [](C& c) -> auto& { return c.generator.label_noise; }));
    f.push_back(double_field<C>("generator.junk_prob", [](C& c) -> auto& { return c.generator.junk_prob; }));
    f.push_back(double_field<C>("generator.junk_spread", [](C& c) -> auto& { return c.generator.junk_spread; }));
    f.push_back(size_field<C>("generator.iterations", [](C& c) -> auto& { return c.generator.gan.iterations; }));
    f.push_back(size_field<C>("generator.batch_size", [](C& c) -> auto& { return c.generator.gan.batch_size; }));
    f.push_back(double_field<C>("generator.lr_g", [](C& c) -> auto& { return c.generator.gan.lr_generator; }));
    f.push_back(double_field<C>("generator.lr_d", [](C& c) -> auto& { return c.generator.gan.lr_discriminator; }));
    f.push_back(double_field<C>("generator.momentum", [](C& c) -> auto& { return c.generator.gan.momentum; }));
    f.push_back(size_field<C>("generator.noise_dim", [](C& c) -> auto& { return c.generator.gan.noise_dim; }));
    f.push_back(sizes_field<C>("generator.g_hidden", [](C& c) -> auto& { return c.generator.gan.generator_hidden; }));
    f.push_back(sizes_field<C>("generator.d_hidden", [](C& c) -> auto& { return c.generator.gan.discriminator_hidden; }));

    f.push_back(size_field<C>("n_fake", [](C& c) -> auto& { return c.n_fake; }));
    f.push_back(bool_field<C>("m1.enabled", [](C& c) -> auto& { return c.use_m1; }));
    add_train_fields<C>(f, "m1.", [](C& c) -> nn::TrainConfig& { return c.m1.dr; });
    f.push_back(sizes_field<C>("m1.hidden", [](C& c) -> auto& { return c.m1.dr_hidden; }));
    f.push_back(size_field<C>("m1.n_fake_train", [](C& c) -> auto& { return c.m1.n_fake_train; }));
    f.push_back(size_field<C>("m1.calibration_size", [](C& c) -> auto& { return c.m1.calibration_size; }));
    f.push_back(double_field<C>("m1.gamma", [](C& c) -> auto& { return c.m1.gamma; }));

    f.push_back(double_field<C>("m2.rho", [](C& c) -> auto& { return c.rho; }));
    f.push_back(bool_field<C>("m2.filter", [](C& c) -> auto& { return c.use_filter; }));
    f.push_back(bool_field<C>("m2.replacement", [](C& c) -> auto& { return c.use_replacement; }));
    f.push_back({"m3.mg_cap", always<C>,
                 [](C& c, std::string_view v) {
                   if (v == "all") c.mg_cap.reset();
                   else c.mg_cap = parse_size(v);
                 },
                 [](const C& c) { return c.mg_cap ? std::to_string(*c.mg_cap) : std::string("all"); }});

    f.push_back(sizes_field<C>("teacher.hidden", [](C& c) -> auto& { return c.teacher.hidden; }));
    add_train_fields<C>(f, "teacher.", [](C& c) -> nn::TrainConfig& { return c.teacher.train; });
    f.push_back(sizes_field<C>("student.hidden", [](C& c) -> auto& { return c.student.hidden; }));
    add_train_fields<C>(f, "student.", [](C& c) -> nn::TrainConfig& { return c.student.train; });
    f.push_back({"student.mode", always<C>,
                 [](C& c, std::string_view v) {
                   if (v == "plain") c.student_mode = StudentMode::plain;
                   else if (v == "blkd") c.student_mode = StudentMode::blkd;
                   else throw FormatError("expected plain or blkd, got '" + std::string(v) + "'");
                 },
                 [](const C& c) { return std::string(c.student_mode == StudentMode::plain ? "plain" : "blkd"); }});
    f.push_back(double_field<C>("student.lambda_kd", [](C& c) -> auto& { return c.lambda_kd; }));
    f.push_back(double_field<C>("student.temperature", [](C& c) -> auto& { return c.temperature; }));
    return f;
  }();
  return fields;
}

template <class Cfg>
Cfg apply_fields(Cfg cfg, const std::vector<Field<Cfg>>& fields, const KeyValues& kv,
                 const std::vector<std::string>& first = {}) {
  std::map<std::string, const Field<Cfg>*> by_key;
  for (const auto& f : fields) by_key[f.key] = &f;
  for (const auto& [k, v] : kv)
    if (!by_key.count(k)) throw ConfigError("unknown config key '" + k + "'");
  auto apply = [&](const std::string& k, const std::string& v) {
    const auto* f = by_key.at(k);
    if (!f->applies(cfg)) throw ConfigError("config key '" + k + "' does not apply to this configuration");
    try {
      f->set(cfg, v);
    } catch (const std::exception& e) {
      throw ConfigError("config key '" + k + "': " + e.what());
    }
  };
  for (const auto& k : first)
    if (auto it = kv.find(k); it != kv.end()) apply(k, it->second);
  for (const auto& [k, v] : kv)
    if (std::find(first.begin(), first.end(), k) == first.end()) apply(k, v);
  return cfg;
}

template <class Cfg>
std::string snapshot_fields(const Cfg& cfg, const std::vector<Field<Cfg>>& fields) {
  std::ostringstream os;
  for (const auto& f : fields)
    if (f.applies(cfg)) os << f.key << '=' << f.get(cfg) << '\n';
  return os.str();
}

}  // namespace detail

/// Builds a pipeline configuration from defaults overridden by `kv`, then
/// validates it. Throws ConfigError on any unknown, malformed or invalid key.
inline PipelineConfig pipeline_config_from(const KeyValues& kv) {
  PipelineConfig cfg;
  cfg = detail::apply_fields(cfg, detail::pipeline_fields(), kv, {"data.family"});
  if (!kv.count("m2.rho"))
    cfg.rho = cfg.data.is_classification() ? kDefaultRhoClassification : kDefaultRhoRegression;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) { return pipeline_config_from(load_key_values(path)); }

/// Every key with its resolved value, in schema order.
inline std::string snapshot(const PipelineConfig& cfg) { return detail::snapshot_fields(cfg, detail::pipeline_fields()); }

struct BoundSetup {
  theory::DiscreteSetup setup;
  std::uint64_t seed = 0;
};

namespace detail {
inline const std::vector<Field<BoundSetup>>& bound_fields() {
  using B = BoundSetup;
  static const std::vector<Field<B>> fields = [] {
    std::vector<Field<B>> f;
    f.push_back(u64_field<B>("seed", [](B& b) -> auto& { return b.seed; }));
    f.push_back(size_field<B>("bound.x_points", [](B& b) -> auto& { return b.setup.x_points; }));
    f.push_back(doubles_field<B>("bound.px", [](B& b) -> auto& { return b.setup.px; }));
    f.push_back(doubles_field<B>("bound.eta", [](B& b) -> auto& { return b.setup.eta; }));
    f.push_back(doubles_field<B>("bound.gen_px", [](B& b) -> auto& { return b.setup.gen_px; }));
    f.push_back(double_field<B>("bound.gen_flip", [](B& b) -> auto& { return b.setup.gen_flip; }));
    f.push_back(double_field<B>("bound.m1_ceiling_fraction", [](B& b) -> auto& { return b.setup.m1_ceiling_fraction; }));
    f.push_back(doubles_field<B>("bound.teacher", [](B& b) -> auto& { return b.setup.teacher; }));
    f.push_back(double_field<B>("bound.rho", [](B& b) -> auto& { return b.setup.rho; }));
    f.push_back(size_field<B>("bound.n_real", [](B& b) -> auto& { return b.setup.n_real; }));
    f.push_back(size_field<B>("bound.m_fake", [](B& b) -> auto& { return b.setup.m_fake; }));
    f.push_back(size_field<B>("bound.n_mc", [](B& b) -> auto& { return b.setup.n_mc; }));
    f.push_back(bool_field<B>("bound.rademacher_per_trial", [](B& b) -> auto& { return b.setup.rademacher_per_trial; }));
    return f;
  }();
  return fields;
}
}  // namespace detail

inline BoundSetup bound_setup_from(const KeyValues& kv) {
  auto b = detail::apply_fields(BoundSetup{}, detail::bound_fields(), kv);
  try {
    b.setup.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid bound setup: ") + e.what());
  }
  return b;
}

inline BoundSetup load_bound_setup(const std::string& path) { return bound_setup_from(load_key_values(path)); }

inline std::string snapshot(const BoundSetup& b) { return detail::snapshot_fields(b, detail::bound_fields()); }

}  // namespace cgankd
