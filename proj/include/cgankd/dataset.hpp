#pragma once

// Samples, labels and datasets shared by every pipeline stage, plus the
// `cgankd-dataset v1` text format.
//
//   line 1   cgankd-dataset v1
//   line 2   task=classification C=<C>   |   task=regression lo=<lo> hi=<hi>
//   line 3   dim=<d>
//   rows     label,prov,f1,...,fd        prov in {real,fake_raw,fake_m1,fake_m2}
//
// Class labels are written as integers, scalar labels and features as the
// shortest decimal that round-trips.

#include <algorithm>
#include <array>
#include <cstddef>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cgankd/common.hpp"

namespace cgankd {

struct ClassIndex {
  int value = 0;
  friend bool operator==(const ClassIndex&, const ClassIndex&) = default;
};

/// Regression label normalized to [0, 1].
struct ScalarLabel {
  double value = 0.0;
  friend bool operator==(const ScalarLabel&, const ScalarLabel&) = default;
};

using Label = std::variant<ClassIndex, ScalarLabel>;

inline bool is_class(const Label& l) { return std::holds_alternative<ClassIndex>(l); }
inline int class_of(const Label& l) { return std::get<ClassIndex>(l).value; }
inline double value_of(const Label& l) { return std::get<ScalarLabel>(l).value; }

enum class TaskKind { classification, regression };

struct Task {
  TaskKind kind = TaskKind::classification;
  int classes = 0;
  // Range of the unnormalized regression label; MAE is reported in these units.
  double label_lo = 0.0;
  double label_hi = 1.0;

  static Task classification(int c) {
    if (c < 2) throw std::invalid_argument("classification needs at least 2 classes");
    return Task{TaskKind::classification, c, 0.0, 1.0};
  }
  static Task regression(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("regression label range must satisfy lo < hi");
    return Task{TaskKind::regression, 0, lo, hi};
  }

  bool is_classification() const { return kind == TaskKind::classification; }
  double unnormalize(double y) const { return label_lo + y * (label_hi - label_lo); }

  friend bool operator==(const Task&, const Task&) = default;
};

enum class Provenance { real, fake_raw, fake_m1, fake_m2 };

inline constexpr std::array<Provenance, 4> kAllProvenances = {
    Provenance::real, Provenance::fake_raw, Provenance::fake_m1, Provenance::fake_m2};

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::real: return "real";
    case Provenance::fake_raw: return "fake_raw";
    case Provenance::fake_m1: return "fake_m1";
    case Provenance::fake_m2: return "fake_m2";
  }
  return "?";
}

inline Provenance parse_provenance(std::string_view s) {
  for (auto p : kAllProvenances)
    if (s == to_string(p)) return p;
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

struct Sample {
  std::vector<double> features;
  Label label;
  Provenance provenance = Provenance::real;

  friend bool operator==(const Sample&, const Sample&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(Task task, std::size_t dim) : task_(task), dim_(dim) {
    if (dim == 0) throw std::invalid_argument("dataset dimension must be positive");
  }

  const Task& task() const { return task_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  void reserve(std::size_t n) { samples_.reserve(n); }

  /// Appends after checking dimension, finiteness and the label invariant.
  void add(Sample s) {
    check(s);
    samples_.push_back(std::move(s));
  }

  /// Throws FormatError when the sample violates this dataset's invariants.
  void check(const Sample& s) const {
    if (s.features.size() != dim_)
      throw FormatError("feature dimension " + std::to_string(s.features.size()) + " != " + std::to_string(dim_));
    if (!all_finite(s.features)) throw FormatError("non-finite feature value");
    if (task_.is_classification()) {
      if (!is_class(s.label)) throw FormatError("scalar label in a classification dataset");
      const int c = class_of(s.label);
      if (c < 0 || c >= task_.classes)
        throw FormatError("class label " + std::to_string(c) + " out of range [0," + std::to_string(task_.classes) + ")");
    } else {
      if (is_class(s.label)) throw FormatError("class label in a regression dataset");
      const double y = value_of(s.label);
      if (!(y >= 0.0 && y <= 1.0)) throw FormatError("regression label " + format_double(y) + " outside [0,1]");
    }
  }

  /// Copy with every provenance tag replaced.
  Dataset with_provenance(Provenance p) const {
    Dataset out = *this;
    for (auto& s : out.samples_) s.provenance = p;
    return out;
  }

  std::map<Provenance, std::size_t> provenance_histogram() const {
    std::map<Provenance, std::size_t> h;
    for (const auto& s : samples_) ++h[s.provenance];
    return h;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(task_.classes, 0)), 0);
    for (const auto& s : samples_) ++counts[static_cast<std::size_t>(class_of(s.label))];
    return counts;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Task task_{};
  std::size_t dim_ = 0;
  std::vector<Sample> samples_;
};

/// One-hot for classes, the raw scalar for regression.
inline std::vector<double> encode_label(const Label& l, const Task& task) {
  if (task.is_classification()) {
    std::vector<double> v(static_cast<std::size_t>(task.classes), 0.0);
    v[static_cast<std::size_t>(class_of(l))] = 1.0;
    return v;
  }
  return {value_of(l)};
}

inline std::size_t label_encoding_dim(const Task& task) {
  return task.is_classification() ? static_cast<std::size_t>(task.classes) : 1;
}

inline std::string format_label(const Label& l) {
  return is_class(l) ? std::to_string(class_of(l)) : format_double(value_of(l));
}

inline std::string task_header(const Task& task) {
  if (task.is_classification()) return "task=classification C=" + std::to_string(task.classes);
  return "task=regression lo=" + format_double(task.label_lo) + " hi=" + format_double(task.label_hi);
}

inline Task parse_task_header(std::string_view line) {
  auto fields = split_view(trim(line), ' ');
  auto value = [&](std::size_t i, std::string_view key) {
    if (i >= fields.size() || fields[i].substr(0, key.size()) != key)
      throw FormatError("malformed task header: '" + std::string(line) + "'");
    return fields[i].substr(key.size());
  };
  const auto kind = value(0, "task=");
  if (kind == "classification" && fields.size() == 2) {
    const auto c = parse_int(value(1, "C="));
    if (c < 2) throw FormatError("task header needs C >= 2");
    return Task::classification(static_cast<int>(c));
  }
  if (kind == "regression" && fields.size() == 3) {
    const double lo = parse_double(value(1, "lo="));
    const double hi = parse_double(value(2, "hi="));
    if (!(hi > lo)) throw FormatError("task header needs lo < hi");
    return Task::regression(lo, hi);
  }
  throw FormatError("malformed task header: '" + std::string(line) + "'");
}

inline void write_dataset(const Dataset& ds, std::ostream& os) {
  os << "cgankd-dataset v1\n" << task_header(ds.task()) << "\ndim=" << ds.dim() << '\n';
  for (const auto& s : ds) {
    os << format_label(s.label) << ',' << to_string(s.provenance);
    for (double f : s.features) os << ',' << format_double(f);
    os << '\n';
  }
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_dataset(ds, os);
  if (!os) throw FormatError("write failed: '" + path + "'");
}

inline Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "cgankd-dataset v1")
    throw FormatError("missing 'cgankd-dataset v1' header");
  if (!std::getline(is, line)) throw FormatError("missing task header");
  const Task task = parse_task_header(line);
  if (!std::getline(is, line) || trim(line).substr(0, 4) != "dim=") throw FormatError("missing dim header");
  const auto dim = parse_int(trim(line).substr(4));
  if (dim <= 0) throw FormatError("dim must be positive");
  Dataset ds(task, static_cast<std::size_t>(dim));
  std::size_t row = 3;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_view(trim(line), ',');
    if (cells.size() != static_cast<std::size_t>(dim) + 2)
      throw FormatError("row " + std::to_string(row) + ": expected " + std::to_string(dim + 2) + " fields, got " +
                        std::to_string(cells.size()));
    Sample s;
    if (task.is_classification())
      s.label = ClassIndex{static_cast<int>(parse_int(cells[0]))};
    else
      s.label = ScalarLabel{parse_double(cells[0])};
    s.provenance = parse_provenance(trim(cells[1]));
    s.features.reserve(static_cast<std::size_t>(dim));
    for (std::size_t j = 2; j < cells.size(); ++j) s.features.push_back(parse_double(cells[j]));
    try {
      ds.add(std::move(s));
    } catch (const FormatError& e) {
      throw FormatError("row " + std::to_string(row) + ": " + e.what());
    }
  }
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return read_dataset(is);
}

}  // namespace cgankd
