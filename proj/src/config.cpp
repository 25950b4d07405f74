#include "adacon/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "adacon/error.hpp"

namespace adacon {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error("invalid value for '" + key + "': " + v);
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error("invalid value for '" + key + "': " + v);
  }
  return out;
}

template <typename Int>
std::vector<Int> parse_list(const std::string& key, const std::string& v) {
  std::vector<Int> out;
  if (v.empty() || v == "none") return out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(parse_int<Int>(key, item));
  return out;
}

template <typename Int>
std::string join(const std::vector<Int>& xs) {
  if (xs.empty()) return "none";
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + std::to_string(xs[k]);
  return out;
}

}  // namespace

void apply_key_values(RunConfig& c, const KeyValues& values) {
  TrainConfig& t = c.train;
  for (const auto& [key, v] : values) {
    if (key == "data") {
      if (v.empty() || v == "none") c.data_path.reset();
      else c.data_path = v;
    } else if (key == "dataset") {
      c.generator.kind = parse_dataset_kind(v);
    } else if (key == "n") {
      c.generator.n = parse_int<Eigen::Index>(key, v);
    } else if (key == "dim") {
      c.generator.feature_dim = parse_int<Eigen::Index>(key, v);
    } else if (key == "noise") {
      c.generator.noise = parse_double(key, v);
    } else if (key == "label_map") {
      if (v.empty() || v == "default") c.generator.label_map.reset();
      else c.generator.label_map = parse_label_map(v);
    } else if (key == "data_seed") {
      c.generator.seed = parse_int<std::uint64_t>(key, v);
    } else if (key == "split_seed") {
      c.split_seed = parse_int<std::uint64_t>(key, v);
    } else if (key == "reg") {
      t.regression.kind = to_regression_kind(parse_loss_kind(v));
    } else if (key == "huber_delta") {
      t.regression.delta = parse_double(key, v);
    } else if (key == "con") {
      t.contrastive = parse_loss_kind(v);
      if (is_regression(t.contrastive)) throw Error("invalid value for 'con': " + v);
    } else if (key == "gamma_reg") {
      t.gamma_reg = parse_double(key, v);
    } else if (key == "gamma_con") {
      if (v == "auto") t.gamma_con.reset();
      else t.gamma_con = parse_double(key, v);
    } else if (key == "temperature") {
      t.temperature = parse_double(key, v);
    } else if (key == "base_batch") {
      t.plan.base_batch = parse_int<Eigen::Index>(key, v);
    } else if (key == "aug_multiple") {
      t.plan.multiple = parse_int<Eigen::Index>(key, v);
    } else if (key == "sigma_aug") {
      t.sigma_aug = parse_double(key, v);
    } else if (key == "lr") {
      t.sgd.learning_rate = parse_double(key, v);
    } else if (key == "momentum") {
      t.sgd.momentum = parse_double(key, v);
    } else if (key == "weight_decay") {
      t.sgd.weight_decay = parse_double(key, v);
    } else if (key == "iterations") {
      t.iterations = parse_int<std::int64_t>(key, v);
    } else if (key == "milestones") {
      t.milestones = parse_list<std::int64_t>(key, v);
    } else if (key == "lr_decay") {
      t.lr_decay = parse_double(key, v);
    } else if (key == "eval_every") {
      t.eval_every = parse_int<std::int64_t>(key, v);
    } else if (key == "seed") {
      t.seed = parse_int<std::uint64_t>(key, v);
    } else if (key == "mode") {
      t.mode = parse_train_mode(v);
    } else if (key == "stage1_iterations") {
      if (v.empty() || v == "auto") t.stage1_iterations.reset();
      else t.stage1_iterations = parse_int<std::int64_t>(key, v);
    } else if (key == "hidden") {
      t.model.hidden = parse_list<Eigen::Index>(key, v);
    } else if (key == "proj_dim") {
      t.model.projection_dim = parse_int<Eigen::Index>(key, v);
    } else if (key == "activation") {
      t.model.activation = parse_activation(v);
    } else if (key == "out") {
      c.out_root = v;
    } else if (key == "run_id") {
      c.run_id = v;
    } else {
      throw Error("unknown config key: " + key);
    }
  }
}

KeyValues to_key_values(const RunConfig& c) {
  const TrainConfig& t = c.train;
  KeyValues kv;
  kv["data"] = c.data_path ? c.data_path->string() : "none";
  kv["dataset"] = to_string(c.generator.kind);
  kv["n"] = std::to_string(c.generator.n);
  kv["dim"] = std::to_string(c.generator.feature_dim);
  kv["noise"] = fmt(c.generator.noise);
  kv["label_map"] = c.generator.label_map ? to_string(*c.generator.label_map) : "default";
  kv["data_seed"] = std::to_string(c.generator.seed);
  kv["split_seed"] = std::to_string(c.split_seed);
  kv["reg"] = to_string(t.regression.kind == RegressionKind::L1    ? LossKind::L1
                        : t.regression.kind == RegressionKind::MSE ? LossKind::MSE
                                                                   : LossKind::Huber);
  kv["huber_delta"] = fmt(t.regression.delta);
  kv["con"] = to_string(t.contrastive);
  kv["gamma_reg"] = fmt(t.gamma_reg);
  kv["gamma_con"] = t.gamma_con ? fmt(*t.gamma_con) : "auto";
  kv["temperature"] = fmt(t.temperature);
  kv["base_batch"] = std::to_string(t.plan.base_batch);
  kv["aug_multiple"] = std::to_string(t.plan.multiple);
  kv["sigma_aug"] = fmt(t.sigma_aug);
  kv["lr"] = fmt(t.sgd.learning_rate);
  kv["momentum"] = fmt(t.sgd.momentum);
  kv["weight_decay"] = fmt(t.sgd.weight_decay);
  kv["iterations"] = std::to_string(t.iterations);
  kv["milestones"] = join(t.milestones);
  kv["lr_decay"] = fmt(t.lr_decay);
  kv["eval_every"] = std::to_string(t.eval_every);
  kv["seed"] = std::to_string(t.seed);
  kv["mode"] = to_string(t.mode);
  kv["stage1_iterations"] = t.stage1_iterations ? std::to_string(*t.stage1_iterations) : "auto";
  kv["hidden"] = join(t.model.hidden);
  kv["proj_dim"] = std::to_string(t.model.projection_dim);
  kv["activation"] = to_string(t.model.activation);
  kv["out"] = c.out_root.string();
  kv["run_id"] = c.run_id;
  return kv;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& values) { save_sidecar(path, values); }

DatasetSplits load_splits(const RunConfig& config) {
  const Dataset data = config.data_path ? load_csv(*config.data_path) : generate_dataset(config.generator);
  return split_dataset(data, config.split_seed);
}

}  // namespace adacon
