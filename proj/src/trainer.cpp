#include "adacon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "adacon/ecdf.hpp"
#include "adacon/error.hpp"

namespace adacon {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "multitask" || name == "multi-task") return TrainMode::MultiTask;
  if (name == "two_stage" || name == "two-stage") return TrainMode::TwoStage;
  throw Error("unknown training mode: " + name);
}

std::string to_string(TrainMode m) { return m == TrainMode::MultiTask ? "multitask" : "two_stage"; }

void TrainConfig::validate() const {
  if (!(gamma_reg >= 0.0)) throw Error("gamma_reg must be >= 0");
  if (gamma_con && !(*gamma_con >= 0.0)) throw Error("gamma_con must be >= 0");
  if (iterations < 0) throw Error("iterations must be >= 0");
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  if (plan.base_batch < 1 || plan.multiple < 1) throw Error("batch plan sizes must be >= 1");
  if (!(sigma_aug >= 0.0)) throw Error("sigma_aug must be >= 0");
  if (eval_every < 1) throw Error("eval_every must be >= 1");
  if (is_regression(contrastive)) throw Error("contrastive loss kind expected, got " + to_string(contrastive));
  for (std::size_t k = 1; k < milestones.size(); ++k) {
    if (milestones[k] <= milestones[k - 1]) throw Error("milestones must be strictly increasing");
  }
  if (stage1_iterations && (*stage1_iterations < 0 || *stage1_iterations > iterations)) {
    throw Error("stage1_iterations must lie in [0, iterations]");
  }
}

double round_to_one_significant(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw Error("cannot round a non-positive value");
  int e = static_cast<int>(std::floor(std::log10(x)));
  auto scale = [](int exp10) { return std::pow(10.0, std::abs(exp10)); };
  double mant = e < 0 ? x * scale(e) : x / scale(e);
  if (mant >= 10.0) {
    ++e;
    mant = e < 0 ? x * scale(e) : x / scale(e);
  }
  double digit = std::round(mant);
  if (digit >= 10.0) {
    digit = 1.0;
    ++e;
  }
  return e < 0 ? digit / scale(e) : digit * scale(e);
}

double auto_balance_gamma(std::span<const double> reg_losses, std::span<const double> con_losses) {
  if (reg_losses.empty() || con_losses.empty()) throw Error("no first-epoch losses to balance");
  const double reg = std::accumulate(reg_losses.begin(), reg_losses.end(), 0.0) / static_cast<double>(reg_losses.size());
  const double con = std::accumulate(con_losses.begin(), con_losses.end(), 0.0) / static_cast<double>(con_losses.size());
  if (!(con > 0.0)) throw Error("degenerate run: mean contrastive loss is not positive");
  if (!(reg > 0.0)) throw Error("degenerate run: mean regression loss is not positive");
  return round_to_one_significant(reg / con);
}

EmbeddingBatch<double> embed_dataset(const ModelParams& params, const Dataset& data) {
  ForwardOutput out = forward(params, data.features);
  EmbeddingBatch<double> batch;
  batch.embeddings = std::move(out.embeddings);
  batch.labels = data.labels;
  batch.source_ids.resize(static_cast<std::size_t>(data.size()));
  std::iota(batch.source_ids.begin(), batch.source_ids.end(), std::int64_t{0});
  return batch;
}

namespace {

struct ContrastiveEval {
  double value = 0.0;
  Eigen::MatrixXd grad;
  Eigen::Index skipped = 0;
};

/// One triplet per anchor: its N-pair positive and a uniformly drawn negative.
ContrastiveEval triplet_on_batch(const EmbeddingBatch<double>& batch, const EcdfTable& table, std::mt19937_64& rng) {
  std::vector<Eigen::Index> ai, pi, ni;
  Eigen::Index skipped = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Eigen::Index p = npair_positive(batch, i);
    const std::vector<Eigen::Index> neg = batch.negatives(i);
    if (p < 0 || neg.empty()) {
      ++skipped;
      continue;
    }
    ai.push_back(i);
    pi.push_back(p);
    ni.push_back(neg[std::uniform_int_distribution<std::size_t>(0, neg.size() - 1)(rng)]);
  }
  ContrastiveEval out;
  out.grad = Eigen::MatrixXd::Zero(batch.size(), batch.dim());
  out.skipped = skipped;
  if (ai.empty()) return out;

  const auto t = static_cast<Eigen::Index>(ai.size());
  TripletBatch<double> trip;
  trip.anchors = batch.embeddings(ai, Eigen::all);
  trip.positives = batch.embeddings(pi, Eigen::all);
  trip.negatives = batch.embeddings(ni, Eigen::all);
  trip.anchor_labels = batch.labels(ai);
  trip.negative_labels = batch.labels(ni);
  const LossResult<double> r = adaptive_triplet_loss<double>(trip, table, TripletOptions{false});
  out.value = r.value;
  for (Eigen::Index k = 0; k < t; ++k) {
    out.grad.row(ai[static_cast<std::size_t>(k)]) += r.grad.row(k);
    out.grad.row(pi[static_cast<std::size_t>(k)]) += r.grad.row(t + k);
    out.grad.row(ni[static_cast<std::size_t>(k)]) += r.grad.row(2 * t + k);
  }
  return out;
}

ContrastiveEval contrastive_on_batch(LossKind kind, const EmbeddingBatch<double>& batch, const EcdfTable& table,
                                     Temperature temp, std::mt19937_64& rng) {
  LossResult<double> r;
  switch (kind) {
    case LossKind::AdaCon:
      r = adacon_loss<double>(batch, margin_matrix(table, batch.labels), temp);
      break;
    case LossKind::SupCon:
      r = supcon_loss<double>(batch, temp);
      break;
    case LossKind::NPair:
      r = npair_loss<double>(batch);
      break;
    case LossKind::Triplet:
      return triplet_on_batch(batch, table, rng);
    default:
      throw Error("not a contrastive loss: " + to_string(kind));
  }
  return {r.value, std::move(r.grad), r.skipped_anchors};
}

/// Settings for one optimization phase. Two-stage training runs two phases.
struct Phase {
  double gamma_reg = 1.0;
  std::optional<double> gamma_con;  // empty: auto
  LossKind contrastive = LossKind::None;
  bool use_regression = true;
  double base_lr = 1e-2;
  std::int64_t iterations = 0;
  std::vector<std::int64_t> milestones;
  std::uint64_t shuffle_seed = 0;
  bool evaluate = true;
};

struct LoopState {
  ModelParams params;
  ModelParams best;
  double best_mae = std::numeric_limits<double>::infinity();
  TrainRecord record;
};

void run_phase(const TrainConfig& config, const Phase& phase, const DatasetSplits& splits, const EcdfTable& table,
               std::int64_t offset, LoopState& st, const StepObserver& observer) {
  if (phase.iterations == 0) return;
  const Temperature temp(config.temperature);
  OptimizerState opt = make_optimizer(st.params, config.sgd);
  const LrSchedule schedule{phase.base_lr, phase.milestones, config.lr_decay};
  std::mt19937_64 sampler(phase.shuffle_seed ^ 0x9E3779B97F4A7C15ULL);

  const BatchPlan plan{config.plan.base_batch, config.plan.multiple, phase.shuffle_seed};
  std::uint64_t epoch = 0;
  auto epoch_batches = std::make_unique<EpochBatches>(splits.train, plan, config.sigma_aug, epoch);
  const auto warmup = static_cast<std::int64_t>(epoch_batches->batches_per_epoch());

  const bool has_con = phase.contrastive != LossKind::None;
  const bool auto_gamma = has_con && !phase.gamma_con.has_value();
  double gamma_con = auto_gamma ? 0.0 : phase.gamma_con.value_or(0.0);
  std::vector<double> warm_reg, warm_con;

  for (std::int64_t it = 0; it < phase.iterations; ++it) {
    std::optional<Batch> batch = epoch_batches->next();
    if (!batch) {
      epoch_batches = std::make_unique<EpochBatches>(splits.train, plan, config.sigma_aug, ++epoch);
      batch = epoch_batches->next();
    }

    const double lr = lr_at(schedule, it);
    opt.settings.learning_rate = lr;
    const ForwardOutput fwd = forward(st.params, batch->inputs);

    const LossResult<double> reg = regression_loss<double>(config.regression, fwd.predictions, batch->labels);
    const double lreg = phase.use_regression ? reg.value : 0.0;

    ContrastiveEval con;
    if (has_con) {
      EmbeddingBatch<double> eb{fwd.embeddings, batch->labels, batch->source_ids};
      con = contrastive_on_batch(phase.contrastive, eb, table, temp, sampler);
      st.record.skipped_anchors += con.skipped;
    }

    const double gamma_reg = phase.use_regression ? phase.gamma_reg : 0.0;
    const double ltotal = gamma_reg * lreg + gamma_con * con.value;
    StepLog log{offset + it + 1, lreg, con.value, ltotal, lr, gamma_reg, gamma_con};
    if (!std::isfinite(lreg) || !std::isfinite(con.value) || !std::isfinite(ltotal)) {
      st.record.aborted = true;
      st.record.diagnostic = "non-finite loss at iteration " + std::to_string(log.iteration);
      return;
    }

    // Zero-weight terms are left out of the backward pass entirely.
    const Eigen::MatrixXd grad_z = (has_con && gamma_con != 0.0) ? Eigen::MatrixXd(gamma_con * con.grad)
                                                                   : Eigen::MatrixXd();
    const Eigen::VectorXd grad_pred = gamma_reg != 0.0 ? Eigen::VectorXd(gamma_reg * reg.grad.col(0))
                                                       : Eigen::VectorXd();
    try {
      backward_and_step(st.params, fwd.cache, grad_z, grad_pred, opt);
    } catch (const NumericalError& e) {
      st.record.aborted = true;
      st.record.diagnostic = std::string(e.what()) + " at iteration " + std::to_string(log.iteration);
      return;
    }
    st.record.steps.push_back(log);
    if (observer) observer(log.iteration, st.params);

    if (auto_gamma && it < warmup) {
      warm_reg.push_back(reg.value);
      warm_con.push_back(con.value);
      if (it + 1 == warmup) {
        gamma_con = auto_balance_gamma(warm_reg, warm_con);
        st.record.gamma_con = gamma_con;
      }
    }

    const bool last = it + 1 == phase.iterations;
    if (phase.evaluate && ((it + 1) % config.eval_every == 0 || last)) {
      const MetricsReport val = regression_metrics(predict(st.params, splits.val.features), splits.val.labels);
      st.record.evals.push_back({log.iteration, val});
      if (val.mae < st.best_mae) {
        st.best_mae = val.mae;
        st.best = st.params;
        st.record.best_iteration = log.iteration;
        st.record.best_val = val;
      }
    }
  }
  if (auto_gamma && st.record.gamma_con == 0.0 && !warm_reg.empty()) {
    st.record.gamma_con = auto_balance_gamma(warm_reg, warm_con);
  }
}

std::vector<std::int64_t> scaled_milestones(const TrainConfig& config, std::int64_t length) {
  std::vector<std::int64_t> out;
  if (config.iterations == 0) return out;
  for (std::int64_t m : config.milestones) {
    out.push_back(static_cast<std::int64_t>(std::llround(static_cast<double>(m) * static_cast<double>(length) /
                                                         static_cast<double>(config.iterations))));
  }
  return out;
}

LoopState start(const TrainConfig& config, const DatasetSplits& splits) {
  config.validate();
  if (splits.train.size() < 2) throw Error("dataset too small");
  ModelSpec spec = config.model;
  spec.input_dim = splits.train.dim();
  LoopState st;
  st.params = init_params(spec, config.seed);
  st.best = st.params;
  st.record.gamma_auto = is_contrastive(config.contrastive) && !config.gamma_con.has_value();
  st.record.gamma_con = config.gamma_con.value_or(0.0);
  return st;
}

TrainResult finish(LoopState& st, const DatasetSplits& splits) {
  if (splits.test.size() > 0) {
    st.record.test = regression_metrics(predict(st.best, splits.test.features), splits.test.labels);
  }
  return {std::move(st.record), std::move(st.best)};
}

}  // namespace

TrainResult run_training(const TrainConfig& config, const DatasetSplits& splits, const StepObserver& observer) {
  if (config.mode == TrainMode::TwoStage) return run_two_stage(config, splits, observer);
  LoopState st = start(config, splits);
  const EcdfTable table = fit_ecdf(splits.train.labels);

  Phase phase;
  phase.gamma_reg = config.gamma_reg;
  phase.gamma_con = config.gamma_con;
  phase.contrastive = config.contrastive;
  phase.base_lr = config.sgd.learning_rate;
  phase.iterations = config.iterations;
  phase.milestones = config.milestones;
  phase.shuffle_seed = config.seed;
  run_phase(config, phase, splits, table, 0, st, observer);
  return finish(st, splits);
}

TrainResult run_two_stage(const TrainConfig& config, const DatasetSplits& splits, const StepObserver& observer) {
  LoopState st = start(config, splits);
  const EcdfTable table = fit_ecdf(splits.train.labels);
  const std::int64_t first = config.stage1_iterations.value_or(config.iterations / 2);
  const std::int64_t second = config.iterations - first;

  Phase pretrain;
  pretrain.gamma_reg = 0.0;
  pretrain.gamma_con = 1.0;
  pretrain.contrastive = config.contrastive;
  pretrain.use_regression = false;
  pretrain.base_lr = config.sgd.learning_rate;
  pretrain.iterations = config.contrastive == LossKind::None ? 0 : first;
  pretrain.milestones = scaled_milestones(config, first);
  pretrain.shuffle_seed = config.seed;
  pretrain.evaluate = false;
  run_phase(config, pretrain, splits, table, 0, st, observer);
  if (st.record.aborted) return finish(st, splits);

  Phase finetune;
  finetune.gamma_reg = config.gamma_reg;
  finetune.gamma_con = 0.0;
  finetune.contrastive = LossKind::None;
  finetune.base_lr = config.sgd.learning_rate * 0.1;
  finetune.iterations = second;
  finetune.milestones = scaled_milestones(config, second);
  finetune.shuffle_seed = config.seed + 1;
  run_phase(config, finetune, splits, table, first, st, observer);
  st.record.gamma_con = 1.0;
  return finish(st, splits);
}

void write_record_csv(const std::filesystem::path& path, const TrainRecord& record) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write file: " + path.string());
  os.precision(17);
  os << "iteration,lreg,lcon,ltotal,lr,gamma_con\n";
  for (const StepLog& s : record.steps) {
    os << s.iteration << ',' << s.lreg << ',' << s.lcon << ',' << s.ltotal << ',' << s.lr << ',' << s.gamma_con << '\n';
  }
}

std::map<std::string, std::string> record_summary(const TrainRecord& record) {
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  std::map<std::string, std::string> out;
  out["gamma_con"] = fmt(record.gamma_con);
  out["gamma_auto"] = record.gamma_auto ? "true" : "false";
  out["best_iteration"] = std::to_string(record.best_iteration);
  out["steps"] = std::to_string(record.steps.size());
  out["aborted"] = record.aborted ? "true" : "false";
  if (!record.diagnostic.empty()) out["diagnostic"] = record.diagnostic;
  out["skipped_anchors"] = std::to_string(record.skipped_anchors);
  if (record.best_val) {
    out["val_mae"] = fmt(record.best_val->mae);
    out["val_rmse"] = fmt(record.best_val->rmse);
    out["val_r2"] = record.best_val->r2 ? fmt(*record.best_val->r2) : "undefined";
  }
  if (record.test) {
    out["test_mae"] = fmt(record.test->mae);
    out["test_rmse"] = fmt(record.test->rmse);
    out["test_r2"] = record.test->r2 ? fmt(*record.test->r2) : "undefined";
  }
  return out;
}

}  // namespace adacon
