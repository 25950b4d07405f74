#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "adacon/data.hpp"
#include "adacon/diagnostics.hpp"
#include "adacon/error.hpp"
#include "adacon/trainer.hpp"

using namespace adacon;
namespace fs = std::filesystem;

namespace {

DatasetSplits ring_splits(Eigen::Index n, std::uint64_t seed) {
  GeneratorSpec g;
  g.n = n;
  g.seed = seed;
  return split_dataset(generate_dataset(g), seed);
}

TrainConfig short_config(LossKind con, std::int64_t iterations) {
  TrainConfig c;
  c.contrastive = con;
  c.iterations = iterations;
  c.milestones = {iterations / 2, 3 * iterations / 4};
  c.eval_every = 50;
  c.seed = 3;
  return c;
}

std::vector<Eigen::VectorXd> trajectory(const TrainConfig& c, const DatasetSplits& s) {
  std::vector<Eigen::VectorXd> out;
  run_training(c, s, [&](std::int64_t, const ModelParams& p) { out.push_back(p.flatten()); });
  return out;
}

}  // namespace

TEST(Gamma, RoundingExamples) {
  const std::vector<double> r1 = {0.5}, c1 = {100.0};
  EXPECT_DOUBLE_EQ(auto_balance_gamma(r1, c1), 0.005);
  const std::vector<double> r2 = {4.0}, c2 = {5.3};
  EXPECT_DOUBLE_EQ(auto_balance_gamma(r2, c2), 0.8);
  const std::vector<double> r3 = {2.0, 4.0}, c3 = {3.0, 3.0};
  EXPECT_DOUBLE_EQ(auto_balance_gamma(r3, c3), 1.0);
}

TEST(Gamma, RoundToOneSignificantFigure) {
  EXPECT_DOUBLE_EQ(round_to_one_significant(0.000123), 0.0001);
  EXPECT_DOUBLE_EQ(round_to_one_significant(0.96), 1.0);
  EXPECT_DOUBLE_EQ(round_to_one_significant(351.0), 400.0);
  EXPECT_DOUBLE_EQ(round_to_one_significant(7.0), 7.0);
  EXPECT_DOUBLE_EQ(round_to_one_significant(9.7e-5), 1e-4);
}

TEST(Gamma, DegenerateInputs) {
  const std::vector<double> r = {1.0}, zero = {0.0}, empty;
  EXPECT_THROW(auto_balance_gamma(r, zero), Error);
  EXPECT_THROW(auto_balance_gamma(empty, r), Error);
}

TEST(Trainer, ZeroIterationsReturnsInitialParameters) {
  const DatasetSplits s = ring_splits(200, 1);
  TrainConfig c = short_config(LossKind::AdaCon, 0);
  c.milestones = {};
  const TrainResult r = run_training(c, s);
  ModelSpec spec = c.model;
  spec.input_dim = s.train.dim();
  EXPECT_TRUE(r.params == init_params(spec, c.seed));
  EXPECT_TRUE(r.record.steps.empty());
}

TEST(Trainer, DeterministicRecord) {
  const DatasetSplits s = ring_splits(300, 2);
  const TrainConfig c = short_config(LossKind::AdaCon, 120);
  const TrainResult a = run_training(c, s);
  const TrainResult b = run_training(c, s);
  EXPECT_TRUE(a.record == b.record);
  EXPECT_TRUE(a.params == b.params);
}

TEST(Trainer, LoggedTotalIsTheWeightedSum) {
  const DatasetSplits s = ring_splits(300, 2);
  for (LossKind k : {LossKind::AdaCon, LossKind::Triplet, LossKind::NPair}) {
    const TrainResult r = run_training(short_config(k, 150), s);
    ASSERT_EQ(r.record.steps.size(), 150u);
    for (const StepLog& l : r.record.steps) {
      EXPECT_NEAR(l.ltotal, l.gamma_reg * l.lreg + l.gamma_con * l.lcon, 1e-10);
    }
  }
}

TEST(Trainer, AutoGammaAfterFirstEpoch) {
  const DatasetSplits s = ring_splits(300, 2);
  const TrainResult r = run_training(short_config(LossKind::AdaCon, 100), s);
  EXPECT_TRUE(r.record.gamma_auto);
  EXPECT_GT(r.record.gamma_con, 0.0);
  // 210 training rows at 8 sources per batch: 27 batches in the first epoch
  for (std::size_t k = 0; k < r.record.steps.size(); ++k) {
    EXPECT_EQ(r.record.steps[k].gamma_con, k < 27 ? 0.0 : r.record.gamma_con) << k;
  }
  double reg = 0, con = 0;
  for (std::size_t k = 0; k < 27; ++k) {
    reg += r.record.steps[k].lreg;
    con += r.record.steps[k].lcon;
  }
  EXPECT_DOUBLE_EQ(r.record.gamma_con, round_to_one_significant(reg / con));
}

TEST(Trainer, ZeroContrastiveWeightMatchesRegressionOnly) {
  const DatasetSplits s = ring_splits(300, 4);
  TrainConfig with = short_config(LossKind::AdaCon, 100);
  with.gamma_con = 0.0;
  TrainConfig without = short_config(LossKind::None, 100);
  const auto a = trajectory(with, s);
  const auto b = trajectory(without, s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_TRUE(a[k] == b[k]) << "step " << k;
}

TEST(Trainer, HeldOutLabelsNeverReachTheUpdates) {
  DatasetSplits s = ring_splits(300, 6);
  const TrainConfig c = short_config(LossKind::AdaCon, 80);
  const auto a = trajectory(c, s);
  s.val.labels = s.val.labels.array() * 1000.0 + 7.0;
  s.test.labels.setConstant(-5.0);
  const auto b = trajectory(c, s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) ASSERT_TRUE(a[k] == b[k]) << "step " << k;
}

TEST(Trainer, BaselineBeatsTheMeanPredictor) {
  const DatasetSplits s = ring_splits(2000, 0);
  TrainConfig c = short_config(LossKind::None, 3000);
  c.milestones = {1500, 2250};
  c.eval_every = 250;
  const TrainResult r = run_training(c, s);
  ASSERT_TRUE(r.record.test.has_value());
  const double mean = s.train.labels.mean();
  const double mean_mae = (s.test.labels.array() - mean).abs().mean();
  EXPECT_LT(r.record.test->mae, mean_mae);
  EXPECT_FALSE(r.record.aborted);
}

TEST(Trainer, DivergenceAbortsWithFiniteParameters) {
  const DatasetSplits s = ring_splits(300, 2);
  TrainConfig c = short_config(LossKind::AdaCon, 200);
  c.sgd.learning_rate = 1e8;
  c.regression.kind = RegressionKind::MSE;
  const TrainResult r = run_training(c, s);
  EXPECT_TRUE(r.record.aborted);
  EXPECT_FALSE(r.record.diagnostic.empty());
  EXPECT_TRUE(r.params.all_finite());
}

TEST(Trainer, InvalidConfig) {
  const DatasetSplits s = ring_splits(100, 2);
  TrainConfig c = short_config(LossKind::L1, 10);
  EXPECT_THROW(run_training(c, s), Error);
  c = short_config(LossKind::AdaCon, 10);
  c.milestones = {5, 5};
  EXPECT_THROW(run_training(c, s), Error);
  c = short_config(LossKind::AdaCon, 10);
  c.temperature = 0;
  EXPECT_THROW(run_training(c, s), Error);
}

TEST(TwoStage, ZeroLengthStagesReturnInitialParameters) {
  const DatasetSplits s = ring_splits(200, 1);
  TrainConfig c = short_config(LossKind::AdaCon, 0);
  c.mode = TrainMode::TwoStage;
  c.stage1_iterations = 0;
  c.milestones = {};
  const TrainResult r = run_two_stage(c, s);
  ModelSpec spec = c.model;
  spec.input_dim = s.train.dim();
  EXPECT_TRUE(r.params == init_params(spec, c.seed));
}

TEST(TwoStage, SeededRepeatAndStageLayout) {
  const DatasetSplits s = ring_splits(300, 8);
  TrainConfig c = short_config(LossKind::AdaCon, 100);
  c.mode = TrainMode::TwoStage;
  const TrainResult a = run_training(c, s);
  const TrainResult b = run_training(c, s);
  EXPECT_TRUE(a.record == b.record);
  ASSERT_EQ(a.record.steps.size(), 100u);
  EXPECT_EQ(a.record.steps[0].gamma_reg, 0.0);
  EXPECT_EQ(a.record.steps[0].gamma_con, 1.0);
  EXPECT_EQ(a.record.steps[0].lreg, 0.0);
  EXPECT_EQ(a.record.steps[50].gamma_con, 0.0);
  EXPECT_DOUBLE_EQ(a.record.steps[50].lr, c.sgd.learning_rate * 0.1);
  for (const EvalLog& e : a.record.evals) EXPECT_GT(e.iteration, 50);
}

TEST(Embedding, UnitRowsAndLabels) {
  const DatasetSplits s = ring_splits(100, 1);
  const ModelParams p = init_params(ModelSpec{16, {64, 64}, 128, Activation::ReLU}, 0);
  const auto e = embed_dataset(p, s.val);
  EXPECT_EQ(e.size(), s.val.size());
  EXPECT_TRUE(e.labels == s.val.labels);
  EXPECT_TRUE(e.is_unit_norm());
}

TEST(Record, CsvAndSummary) {
  const DatasetSplits s = ring_splits(200, 1);
  const TrainResult r = run_training(short_config(LossKind::SupCon, 60), s);
  const fs::path f = fs::temp_directory_path() / "adacon_record.csv";
  write_record_csv(f, r.record);
  std::ifstream is(f);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header.rfind("iteration,lreg,lcon,ltotal,lr", 0), 0u) << header;
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, 60);
  const auto summary = record_summary(r.record);
  EXPECT_TRUE(summary.count("gamma_con"));
  EXPECT_TRUE(summary.count("best_iteration"));
  EXPECT_TRUE(summary.count("test_mae"));
}
