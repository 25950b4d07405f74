#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adacon/data.hpp"
#include "adacon/diagnostics.hpp"
#include "adacon/losses.hpp"
#include "adacon/model.hpp"

namespace adacon {

enum class TrainMode { MultiTask, TwoStage };

TrainMode parse_train_mode(const std::string& name);
std::string to_string(TrainMode m);

struct TrainConfig {
  RegressionLoss regression{RegressionKind::L1, 0.05};
  LossKind contrastive = LossKind::AdaCon;  // LossKind::None for a regression-only baseline
  double gamma_reg = 1.0;
  std::optional<double> gamma_con;  // empty: balance automatically after the first epoch
  double temperature = 10.0;
  BatchPlan plan{8, 8, 0};
  SgdSettings sgd{};
  std::int64_t iterations = 6000;
  std::vector<std::int64_t> milestones = {3000, 4500};
  double lr_decay = 0.1;
  double sigma_aug = 0.05;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::MultiTask;
  ModelSpec model{};  // input_dim is taken from the data
  std::int64_t eval_every = 250;
  /// Two-stage only: contrastive pretraining length; empty means iterations / 2.
  std::optional<std::int64_t> stage1_iterations;

  /// Throws Error on an invalid configuration.
  void validate() const;
};

struct StepLog {
  std::int64_t iteration = 0;
  double lreg = 0.0;
  double lcon = 0.0;
  double ltotal = 0.0;
  double lr = 0.0;
  double gamma_reg = 0.0;
  double gamma_con = 0.0;

  bool operator==(const StepLog&) const = default;
};

struct EvalLog {
  std::int64_t iteration = 0;
  MetricsReport val;

  bool operator==(const EvalLog&) const = default;
};

struct TrainRecord {
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
  double gamma_con = 0.0;  // resolved weight used after warm-up
  bool gamma_auto = false;
  std::int64_t best_iteration = 0;
  std::optional<MetricsReport> best_val;
  std::optional<MetricsReport> test;
  bool aborted = false;
  std::string diagnostic;
  std::int64_t skipped_anchors = 0;

  bool operator==(const TrainRecord&) const = default;
};

struct TrainResult {
  TrainRecord record;
  ModelParams params;  // best checkpoint by validation MAE
};

/// Called after every accepted optimizer step with the global iteration and
/// current parameters.
using StepObserver = std::function<void(std::int64_t, const ModelParams&)>;

/// Multi-task training (or two-stage when config.mode says so). Margins come
/// from the ECDF of splits.train labels only.
TrainResult run_training(const TrainConfig& config, const DatasetSplits& splits, const StepObserver& observer = {});

/// Contrastive-only pretraining followed by regression-only fine-tuning at a
/// tenth of the learning rate. Milestones are scaled to each stage's length.
TrainResult run_two_stage(const TrainConfig& config, const DatasetSplits& splits, const StepObserver& observer = {});

/// mean(reg) / mean(con) rounded to one significant figure.
double auto_balance_gamma(std::span<const double> reg_losses, std::span<const double> con_losses);

double round_to_one_significant(double x);

/// Embeddings and predictions of a dataset under `params`, no augmentation.
EmbeddingBatch<double> embed_dataset(const ModelParams& params, const Dataset& data);

/// iteration,lreg,lcon,ltotal,lr,gamma_con
void write_record_csv(const std::filesystem::path& path, const TrainRecord& record);
std::map<std::string, std::string> record_summary(const TrainRecord& record);

}  // namespace adacon
