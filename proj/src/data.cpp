#include "adacon/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "adacon/error.hpp"

namespace adacon {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::All: return "all";
  }
  return "all";
}

Dataset Dataset::subset(std::span<const Eigen::Index> indices, Split tag) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), dim());
  out.labels.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(indices[k]);
    out.labels[static_cast<Eigen::Index>(k)] = labels[indices[k]];
  }
  out.split = tag;
  out.metadata = metadata;
  out.metadata["split"] = to_string(tag);
  return out;
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "ring") return DatasetKind::Ring;
  if (name == "poly") return DatasetKind::Poly;
  if (name == "skewed") return DatasetKind::Skewed;
  throw Error("unknown dataset kind: " + name);
}

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::Ring: return "ring";
    case DatasetKind::Poly: return "poly";
    case DatasetKind::Skewed: return "skewed";
  }
  return "ring";
}

LabelMap parse_label_map(const std::string& name) {
  if (name == "identity") return LabelMap::Identity;
  if (name == "cubic") return LabelMap::Cubic;
  if (name == "skewed") return LabelMap::Skewed;
  throw Error("unknown label map: " + name);
}

std::string to_string(LabelMap m) {
  switch (m) {
    case LabelMap::Identity: return "identity";
    case LabelMap::Cubic: return "cubic";
    case LabelMap::Skewed: return "skewed";
  }
  return "identity";
}

LabelMap default_label_map(DatasetKind k) {
  switch (k) {
    case DatasetKind::Ring: return LabelMap::Identity;
    case DatasetKind::Poly: return LabelMap::Cubic;
    case DatasetKind::Skewed: return LabelMap::Skewed;
  }
  return LabelMap::Identity;
}

double apply_label_map(LabelMap map, double t) {
  switch (map) {
    case LabelMap::Identity: return t;
    case LabelMap::Cubic: return 0.5 * t + 2.0 * t * t * t;
    case LabelMap::Skewed: return -std::log(1.0 - t * 0.99);
  }
  return t;
}

Eigen::VectorXd lift(double t, Eigen::Index dim) {
  const double angle = 1.5 * std::numbers::pi * t;
  Eigen::VectorXd x(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double harmonic = static_cast<double>(k / 2 + 1);
    x[k] = (k % 2 == 0 ? std::cos(harmonic * angle) : std::sin(harmonic * angle)) / harmonic;
  }
  return x;
}

namespace {

std::map<std::string, std::string> generator_metadata(const GeneratorSpec& spec, LabelMap map) {
  std::ostringstream noise;
  noise.precision(17);
  noise << spec.noise;
  return {{"kind", to_string(spec.kind)},
          {"n", std::to_string(spec.n)},
          {"feature_dim", std::to_string(spec.feature_dim)},
          {"noise", noise.str()},
          {"label_map", to_string(map)},
          {"seed", std::to_string(spec.seed)}};
}

}  // namespace

Dataset generate_dataset(const GeneratorSpec& spec) {
  if (spec.n < 1) throw Error("dataset size must be >= 1");
  if (spec.feature_dim < 2) throw Error("feature dimension must be >= 2");
  if (!(spec.noise >= 0.0)) throw Error("noise must be >= 0");

  const LabelMap map = spec.label_map.value_or(default_label_map(spec.kind));
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset out;
  out.features.resize(spec.n, spec.feature_dim);
  out.labels.resize(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const double t = unif(rng);
    out.labels[i] = apply_label_map(map, t);
    out.features.row(i) = lift(t, spec.feature_dim).transpose();
    if (spec.noise > 0.0) {
      for (Eigen::Index k = 0; k < spec.feature_dim; ++k) out.features(i, k) += spec.noise * normal(rng);
    }
  }
  out.metadata = generator_metadata(spec, map);
  return out;
}

Dataset dataset_from_latents(std::span<const double> latents, Eigen::Index dim, LabelMap map) {
  if (latents.empty()) throw Error("dataset size must be >= 1");
  if (dim < 2) throw Error("feature dimension must be >= 2");
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(latents.size()), dim);
  out.labels.resize(static_cast<Eigen::Index>(latents.size()));
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.labels[r] = apply_label_map(map, latents[i]);
    out.features.row(r) = lift(latents[i], dim).transpose();
  }
  out.metadata = {{"label_map", to_string(map)}, {"feature_dim", std::to_string(dim)}};
  return out;
}

Eigen::VectorXd augment(const Eigen::VectorXd& row, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return row;
  std::normal_distribution<double> normal(0.0, sigma);
  Eigen::VectorXd out = row;
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] += normal(rng);
  return out;
}

EpochBatches::EpochBatches(const Dataset& data, BatchPlan plan, double sigma_aug, std::uint64_t epoch_seed)
    : data_(data), plan_(plan), sigma_(sigma_aug) {
  if (plan.base_batch < 1 || plan.multiple < 1) throw Error("batch plan sizes must be >= 1");
  if (data.size() < 2) throw Error("dataset too small");
  std::seed_seq seq{plan.shuffle_seed, epoch_seed};
  rng_.seed(seq);
  order_.resize(static_cast<std::size_t>(data.size()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::size_t EpochBatches::batches_per_epoch() const {
  const auto b0 = static_cast<std::size_t>(plan_.base_batch);
  const std::size_t full = order_.size() / b0;
  return full + (order_.size() % b0 >= 2 ? 1 : 0);
}

std::optional<Batch> EpochBatches::next() {
  const std::size_t remaining = order_.size() - cursor_;
  const std::size_t take = std::min(remaining, static_cast<std::size_t>(plan_.base_batch));
  if (take < 2 && !(take == 1 && plan_.base_batch == 1)) return std::nullopt;

  const Eigen::Index m = plan_.multiple;
  const auto rows = static_cast<Eigen::Index>(take) * m;
  Batch batch;
  batch.inputs.resize(rows, data_.dim());
  batch.labels.resize(rows);
  batch.source_ids.reserve(static_cast<std::size_t>(rows));
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < take; ++k) {
    const Eigen::Index src = order_[cursor_ + k];
    const Eigen::VectorXd row = data_.features.row(src).transpose();
    for (Eigen::Index rep = 0; rep < m; ++rep, ++r) {
      batch.inputs.row(r) = augment(row, sigma_, rng_).transpose();
      batch.labels[r] = data_.labels[src];
      batch.source_ids.push_back(src);
    }
  }
  cursor_ += take;
  return batch;
}

std::vector<Batch> batch_iter(const Dataset& data, BatchPlan plan, double sigma_aug, std::uint64_t epoch_seed) {
  EpochBatches epoch(data, plan, sigma_aug, epoch_seed);
  std::vector<Batch> out;
  while (auto b = epoch.next()) out.push_back(std::move(*b));
  return out;
}

DatasetSplits split_dataset(const Dataset& data, std::uint64_t seed) {
  const Eigen::Index n = data.size();
  if (n < 3) throw Error("dataset too small");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(0.70 * static_cast<double>(n))));
  const auto n_val = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(0.15 * static_cast<double>(n))));
  const std::span<const Eigen::Index> all(order);
  DatasetSplits s;
  s.train = data.subset(all.subspan(0, static_cast<std::size_t>(n_train)), Split::Train);
  s.val = data.subset(all.subspan(static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_val)), Split::Val);
  s.test = data.subset(all.subspan(static_cast<std::size_t>(n_train + n_val)), Split::Test);
  return s;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write file: " + path.string());
  for (Eigen::Index k = 0; k < data.dim(); ++k) os << 'f' << k << ',';
  os << "label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index k = 0; k < data.dim(); ++k) os << format_double(data.features(i, k)) << ',';
    os << format_double(data.labels[i]) << '\n';
  }
  if (!os) throw Error("cannot write file: " + path.string());
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open file: " + path.string());

  std::string line;
  if (!std::getline(is, line)) throw Error("empty file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_fields(line);
  if (header.size() < 2) throw Error("header must have at least one feature column and a label column");
  const std::size_t dim = header.size() - 1;
  for (std::size_t k = 0; k < dim; ++k) {
    const std::string expected = "f" + std::to_string(k);
    if (trim(header[k]) != expected) {
      throw Error("header mismatch at column " + std::to_string(k) + ": expected '" + expected + "', got '" +
                  header[k] + "'");
    }
  }
  if (trim(header[dim]) != "label") {
    throw Error("header mismatch at column " + std::to_string(dim) + ": expected 'label', got '" + header[dim] + "'");
  }

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error("malformed row " + std::to_string(rows) + " (line " + std::to_string(line_no) + "): expected " +
                  std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    for (const std::string& raw : fields) {
      const std::string f = trim(raw);
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || f.empty()) {
        throw Error("malformed row " + std::to_string(rows) + " (line " + std::to_string(line_no) + "): '" + raw +
                    "' is not a number");
      }
      if (!std::isfinite(v)) {
        throw Error("non-finite value in row " + std::to_string(rows) + " (line " + std::to_string(line_no) + ")");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw Error("no data rows: " + path.string());

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  out.labels.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < dim; ++k) {
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = values[r * header.size() + k];
    }
    out.labels[static_cast<Eigen::Index>(r)] = values[r * header.size() + dim];
  }
  out.metadata = {{"source", path.string()}};
  return out;
}

void save_sidecar(const std::filesystem::path& path, const std::map<std::string, std::string>& values) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write file: " + path.string());
  for (const auto& [k, v] : values) os << k << '=' << v << '\n';
}

std::map<std::string, std::string> load_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open file: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

}  // namespace adacon
