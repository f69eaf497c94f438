#pragma once

// Augmentation training and the end-to-end pipeline:
//   data -> teacher -> generator -> density-ratio subsampling -> teacher
//   filtering / relabeling -> student trained on real + processed fakes.
// Every stage draws its randomness from derive_seed(master_seed, stage_name),
// so variants that share a master seed share every stage they have in common.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cgankd/cgen.hpp"
#include "cgankd/dataset.hpp"
#include "cgankd/label_adjust.hpp"
#include "cgankd/nncore.hpp"
#include "cgankd/subsample.hpp"
#include "cgankd/synthdata.hpp"

namespace cgankd {

/// A pipeline stage failed; `stage` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class GeneratorKind { oracle, cgan };
enum class StudentMode { plain, blkd };

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::oracle;
  double label_noise = 0.0;  // flip probability (classes) or label std (scalars)
  double junk_prob = 0.0;
  double junk_spread = 10.0;
  GanTrainConfig gan;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{32, 32};
  nn::TrainConfig train;
};

struct PipelineConfig {
  SynthConfig data;          // data.n is N^r
  std::size_t n_test = 2000;
  GeneratorConfig generator;
  std::size_t n_fake = 1000;  // N^g
  double rho = kDefaultRhoClassification;
  std::optional<std::size_t> mg_cap;  // unset keeps every sample surviving M2
  bool use_m1 = true;
  bool use_filter = true;
  bool use_replacement = true;
  SubsampleConfig m1;
  ModelConfig teacher;
  ModelConfig student;
  StudentMode student_mode = StudentMode::plain;
  double lambda_kd = 0.5;
  double temperature = 5.0;
  std::uint64_t seed = 0;

  void validate() const {
    data.validate();
    if (n_fake == 0) throw std::invalid_argument("pipeline: n_fake must be positive");
    if (n_test == 0) throw std::invalid_argument("pipeline: n_test must be positive");
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("pipeline: rho must be in [0,1]");
    teacher.train.validate();
    student.train.validate();
    if (student_mode == StudentMode::blkd) {
      if (!data.is_classification()) throw std::invalid_argument("pipeline: blkd student mode needs classification");
      (void)nn::LossSpec::blkd(lambda_kd, temperature);
    }
  }

  nn::NetSpec net_spec(const ModelConfig& m) const {
    if (data.is_classification())
      return nn::NetSpec::classifier(data.dim, m.hidden, static_cast<std::size_t>(data.task().classes));
    return nn::NetSpec::regressor(data.dim, m.hidden);
  }

  nn::LossSpec base_loss() const { return data.is_classification() ? nn::LossSpec::ce() : nn::LossSpec::se(); }
};

/// D_aug = D^r followed by the processed fakes; provenance tags are kept.
inline Dataset augment(const Dataset& real, const Dataset& fakes) {
  if (fakes.empty()) return real;
  if (!(real.task() == fakes.task()) || real.dim() != fakes.dim())
    throw std::invalid_argument("augment: task or dimension mismatch");
  Dataset out = real;
  out.reserve(real.size() + fakes.size());
  for (const auto& s : fakes) out.add(s);
  return out;
}

/// Fraction of real samples in the augmented set, N^r / (N^r + M^g).
inline double mixture_theta(std::size_t n_real, std::size_t m_fake) {
  return static_cast<double>(n_real) / static_cast<double>(n_real + m_fake);
}

/// Trains a student from `init`. In blkd mode the teacher's soft labels are
/// computed for every sample of `data`, real and fake alike.
inline nn::NetParams train_student(const Dataset& data, const nn::NetParams& init, nn::TrainConfig cfg, StudentMode mode,
                                   double lambda_kd, double temperature, const nn::NetParams* teacher = nullptr) {
  if (mode == StudentMode::blkd) {
    if (!teacher) throw std::invalid_argument("train_student: blkd mode requires a teacher");
    cfg.loss = nn::LossSpec::blkd(lambda_kd, temperature);
    return nn::train(init, data, cfg, teacher).params;
  }
  cfg.loss = data.task().is_classification() ? nn::LossSpec::ce() : nn::LossSpec::se();
  return nn::train(init, data, cfg).params;
}

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineReport {
  Task task;
  std::size_t n_real = 0;   // N^r
  std::size_t n_fake = 0;   // N^g
  std::size_t m_fake = 0;   // M^g
  double rho = 0.0;
  double theta = 1.0;
  nn::Metrics teacher;
  nn::Metrics student_nokd;
  nn::Metrics student_cgankd;
  FilterReport filter;
  std::vector<StageTiming> timings;
  std::uint64_t seed = 0;
};

/// Results of the stages that do not depend on rho, the M^g cap or the
/// M2/M3 switches. Reusable across variants sharing a master seed.
struct PreparedStages {
  Dataset real_train;
  Dataset test;
  nn::NetParams teacher;
  nn::Metrics teacher_metrics;
  nn::NetParams student_init;
  nn::NetParams nokd;
  nn::Metrics nokd_metrics;
  std::optional<GeneratorHandle> generator;
  std::optional<DensityRatioModel> dr;
  std::optional<Dataset> fake_raw;  // N^g unprocessed samples
  std::optional<Dataset> fake_m1;   // D^g_s
  RejectionStats rejection;
  std::vector<StageTiming> timings;
};

namespace detail {

template <class F>
auto run_stage(const std::string& name, std::vector<StageTiming>& timings, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    } else {
      auto r = f();
      timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline void checkpoint(const std::optional<std::filesystem::path>& dir, const std::string& file,
                       const std::function<void(std::ostream&)>& write) {
  if (!dir) return;
  std::filesystem::create_directories(*dir);
  std::ofstream os(*dir / file, std::ios::binary);
  if (!os) throw FormatError("cannot write checkpoint " + (*dir / file).string());
  write(os);
}

inline std::vector<Label> m1_labels(const PipelineConfig& cfg, const Dataset& real, std::size_t n, std::uint64_t seed) {
  if (cfg.data.is_classification()) return balanced_class_labels(cfg.data.task().classes, n);
  return sample_labels(real, n, seed);
}

}  // namespace detail

struct PrepareOptions {
  bool need_raw = false;
  bool need_m1 = true;
  std::optional<std::filesystem::path> checkpoint_dir;
};

inline PreparedStages prepare_stages(const PipelineConfig& cfg, const PrepareOptions& opt = {}) {
  const std::uint64_t seed = cfg.seed;
  std::vector<StageTiming> timings;
  detail::run_stage("config", timings, [&] { cfg.validate(); });
  const auto& ck = opt.checkpoint_dir;

  auto [train, test] = detail::run_stage("data", timings, [&] {
    SynthConfig dc = cfg.data;
    dc.n = cfg.data.n + cfg.n_test;
    dc.seed = derive_seed(seed, "data");
    const Dataset all = make_dataset(dc);
    auto parts = split(all, static_cast<double>(cfg.data.n) / static_cast<double>(dc.n), derive_seed(seed, "split"));
    detail::checkpoint(ck, "real_train.txt", [&](std::ostream& os) { write_dataset(parts.first, os); });
    detail::checkpoint(ck, "test.txt", [&](std::ostream& os) { write_dataset(parts.second, os); });
    return parts;
  });

  auto teacher = detail::run_stage("teacher", timings, [&] {
    nn::TrainConfig tc = cfg.teacher.train;
    tc.loss = cfg.base_loss();
    tc.seed = derive_seed(seed, "teacher.train");
    auto p = nn::train(nn::init_params(cfg.net_spec(cfg.teacher), derive_seed(seed, "teacher.init")), train, tc).params;
    detail::checkpoint(ck, "teacher.net", [&](std::ostream& os) { nn::write_params(p, os); });
    return p;
  });

  PreparedStages st{train, test, teacher, nn::evaluate(teacher, test),
                    nn::init_params(cfg.net_spec(cfg.student), derive_seed(seed, "student.init")), teacher, {}, {}, {},
                    {}, {}, {}, {}};

  detail::run_stage("nokd", timings, [&] {
    nn::TrainConfig sc = cfg.student.train;
    sc.seed = derive_seed(seed, "student.train");
    st.nokd = train_student(st.real_train, st.student_init, sc, StudentMode::plain, 0.0, 1.0);
    st.nokd_metrics = nn::evaluate(st.nokd, st.test);
  });

  st.generator = detail::run_stage("generator", timings, [&]() -> GeneratorHandle {
    GeneratorHandle h = [&]() -> GeneratorHandle {
      if (cfg.generator.kind == GeneratorKind::oracle)
        return make_oracle(cfg.data, cfg.generator.label_noise, cfg.generator.junk_prob, cfg.generator.junk_spread);
      GanTrainConfig g = cfg.generator.gan;
      g.seed = derive_seed(seed, "generator");
      return train_cgan(st.real_train, g);
    }();
    detail::checkpoint(ck, "generator.txt", [&](std::ostream& os) { write_generator(h, os); });
    return h;
  });

  const auto labels = detail::m1_labels(cfg, st.real_train, cfg.n_fake, derive_seed(seed, "m1.labels"));
  if (opt.need_raw) {
    st.fake_raw = detail::run_stage("raw_fakes", timings, [&] {
      auto d = sample(*st.generator, labels, derive_seed(seed, "m1.sample"));
      detail::checkpoint(ck, "fake_raw.txt", [&](std::ostream& os) { write_dataset(d, os); });
      return d;
    });
  }
  if (opt.need_m1) {
    st.fake_m1 = detail::run_stage("m1", timings, [&] {
      SubsampleConfig sc = cfg.m1;
      sc.seed = derive_seed(seed, "m1.dr");
      const auto dr_fake = sample(*st.generator, detail::m1_labels(cfg, st.real_train, sc.n_fake_train,
                                                                   derive_seed(seed, "m1.dr_labels")),
                                  derive_seed(seed, "m1.dr_fake"));
      const auto calib = sample(*st.generator, detail::m1_labels(cfg, st.real_train, sc.calibration_size,
                                                                 derive_seed(seed, "m1.calibration_labels")),
                                derive_seed(seed, "m1.calibration"));
      st.dr = train_dr(st.real_train, dr_fake, sc, &calib);
      detail::checkpoint(ck, "dr.txt", [&](std::ostream& os) { write_dr_model(*st.dr, os); });
      auto d = rejection_sample(*st.generator, *st.dr, labels, derive_seed(seed, "m1.sample"), &st.rejection);
      detail::checkpoint(ck, "fake_m1.txt", [&](std::ostream& os) { write_dataset(d, os); });
      return d;
    });
  }
  st.timings = std::move(timings);
  return st;
}

/// Per-run switches applied on top of prepared stages.
struct VariantOptions {
  double rho = 1.0;
  std::optional<std::size_t> mg_cap;
  bool use_m1 = true;
  bool use_filter = true;
  bool use_replacement = true;
};

inline VariantOptions variant_of(const PipelineConfig& cfg) {
  return {cfg.rho, cfg.mg_cap, cfg.use_m1, cfg.use_filter, cfg.use_replacement};
}

/// A uniformly chosen subset of `cap` samples, kept in input order.
inline Dataset cap_samples(const Dataset& ds, std::optional<std::size_t> cap, std::uint64_t seed) {
  if (!cap || ds.size() <= *cap) return ds;
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(*cap);
  std::sort(idx.begin(), idx.end());
  Dataset out(ds.task(), ds.dim());
  for (auto i : idx) out.add(ds[i]);
  return out;
}

struct FinishResult {
  PipelineReport report;
  Dataset processed_fakes;  // D^g_rho after the cap
  nn::NetParams student;
};

inline FinishResult finish_pipeline(const PipelineConfig& cfg, const PreparedStages& st, const VariantOptions& v,
                                    const std::optional<std::filesystem::path>& ck = std::nullopt) {
  std::vector<StageTiming> timings = st.timings;
  const std::uint64_t seed = cfg.seed;
  const Dataset& fakes = v.use_m1 ? *st.fake_m1 : *st.fake_raw;
  if ((v.use_m1 && !st.fake_m1) || (!v.use_m1 && !st.fake_raw))
    throw StageError("m2", "prepared stages lack the requested fake set");

  auto m2 = detail::run_stage("m2", timings, [&] {
    auto r = run_m2(st.teacher, fakes, v.rho, v.use_filter, v.use_replacement);
    r.processed = cap_samples(r.processed, v.mg_cap, derive_seed(seed, "m3.cap"));
    detail::checkpoint(ck, "fake_m2.txt", [&](std::ostream& os) { write_dataset(r.processed, os); });
    return r;
  });

  // Without fakes the student is the NOKD student, whatever the loss mode.
  auto student = detail::run_stage("m3", timings, [&] {
    if (m2.processed.empty()) return st.nokd;
    const Dataset aug = augment(st.real_train, m2.processed);
    nn::TrainConfig sc = cfg.student.train;
    sc.seed = derive_seed(seed, "student.train");
    auto p = train_student(aug, st.student_init, sc, cfg.student_mode, cfg.lambda_kd, cfg.temperature, &st.teacher);
    detail::checkpoint(ck, "student.net", [&](std::ostream& os) { nn::write_params(p, os); });
    return p;
  });

  PipelineReport rep;
  rep.task = st.real_train.task();
  rep.n_real = st.real_train.size();
  rep.n_fake = cfg.n_fake;
  rep.m_fake = m2.processed.size();
  rep.rho = v.rho;
  rep.theta = mixture_theta(rep.n_real, rep.m_fake);
  rep.teacher = st.teacher_metrics;
  rep.student_nokd = st.nokd_metrics;
  rep.student_cgankd = detail::run_stage("evaluate", timings, [&] { return nn::evaluate(student, st.test); });
  rep.filter = std::move(m2.report);
  rep.timings = std::move(timings);
  rep.seed = seed;
  return FinishResult{std::move(rep), std::move(m2.processed), std::move(student)};
}

inline PipelineReport run_pipeline(const PipelineConfig& cfg,
                                   const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt) {
  const auto v = variant_of(cfg);
  PrepareOptions opt;
  opt.need_m1 = v.use_m1;
  opt.need_raw = !v.use_m1;
  opt.checkpoint_dir = checkpoint_dir;
  const auto st = prepare_stages(cfg, opt);
  return finish_pipeline(cfg, st, v, checkpoint_dir).report;
}

struct AblationRow {
  std::string variant;
  std::size_t fake_count = 0;  // fakes added to the real set
  nn::Metrics metrics;
};

inline constexpr const char* kAblationVariants[] = {"raw", "m1", "m1_filter", "m1_m2"};

/// Four variants sharing every seed: raw fakes, +M1, +M1+filtering, and
/// +M1+filtering+replacement. Replacement is regression-only, so the last two
/// coincide for classification.
inline std::vector<AblationRow> run_ablation(const PipelineConfig& cfg) {
  PrepareOptions opt;
  opt.need_raw = true;
  opt.need_m1 = true;
  const auto st = prepare_stages(cfg, opt);
  const VariantOptions variants[] = {
      {cfg.rho, cfg.mg_cap, false, false, false},
      {cfg.rho, cfg.mg_cap, true, false, false},
      {cfg.rho, cfg.mg_cap, true, true, false},
      {cfg.rho, cfg.mg_cap, true, true, true},
  };
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto r = finish_pipeline(cfg, st, variants[i]);
    rows.push_back({kAblationVariants[i], r.report.m_fake, r.report.student_cgankd});
  }
  return rows;
}

}  // namespace cgankd
