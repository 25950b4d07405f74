#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "adacon/data.hpp"
#include "adacon/ecdf.hpp"
#include "adacon/error.hpp"
#include "oracles.hpp"

using namespace adacon;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "adacon_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string load_error(const std::string& contents) {
  const fs::path f = temp_file("bad.csv");
  std::ofstream(f) << contents;
  try {
    load_csv(f);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Dataset small_dataset(Eigen::Index n) {
  GeneratorSpec g;
  g.n = n;
  g.feature_dim = 4;
  g.seed = 3;
  return generate_dataset(g);
}

}  // namespace

TEST(Generator, NoiselessLatents) {
  const std::vector<double> t = {0.0, 0.5};
  const Dataset d = dataset_from_latents(t, 16, LabelMap::Identity);
  EXPECT_EQ(d.labels[0], 0.0);
  EXPECT_EQ(d.labels[1], 0.5);
  EXPECT_TRUE(d.features.row(0).transpose() == lift(0.0, 16));
  EXPECT_TRUE(d.features.row(1).transpose() == lift(0.5, 16));
}

TEST(Generator, LiftFirstPairTracesThreeQuarterArc) {
  const Eigen::VectorXd a = lift(0.0, 4), b = lift(1.0, 4), c = lift(0.5, 4);
  EXPECT_NEAR(a[0], 1.0, 1e-15);
  EXPECT_NEAR(a[1], 0.0, 1e-15);
  EXPECT_NEAR(b[0], 0.0, 1e-15);
  EXPECT_NEAR(b[1], -1.0, 1e-15);
  EXPECT_NEAR(std::atan2(c[1], c[0]), 0.75 * M_PI, 1e-15);
  EXPECT_NEAR(a[2], 0.5, 1e-15);  // second harmonic at half amplitude
}

TEST(Generator, SeedDeterminism) {
  GeneratorSpec g;
  g.n = 300;
  g.seed = 12;
  const Dataset a = generate_dataset(g), b = generate_dataset(g);
  EXPECT_TRUE(a.features == b.features);
  EXPECT_TRUE(a.labels == b.labels);
  g.seed = 13;
  EXPECT_FALSE(generate_dataset(g).features == a.features);
}

TEST(Generator, LabelMaps) {
  EXPECT_EQ(apply_label_map(LabelMap::Identity, 0.3), 0.3);
  EXPECT_DOUBLE_EQ(apply_label_map(LabelMap::Cubic, 0.5), 0.25 + 0.25);
  EXPECT_DOUBLE_EQ(apply_label_map(LabelMap::Skewed, 0.5), -std::log(1.0 - 0.495));
  EXPECT_EQ(default_label_map(DatasetKind::Poly), LabelMap::Cubic);
  EXPECT_EQ(parse_dataset_kind("skewed"), DatasetKind::Skewed);
  EXPECT_THROW(parse_dataset_kind("spiral"), Error);
}

TEST(Generator, SkewedLabelsAreUniformAfterEcdf) {
  GeneratorSpec g;
  g.kind = DatasetKind::Skewed;
  g.n = 2000;
  g.seed = 5;
  const Dataset d = generate_dataset(g);
  const EcdfTable t = fit_ecdf(d.labels);
  std::vector<double> phi, raw;
  const double hi = d.labels.maxCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    phi.push_back(t.transform(d.labels[i]));
    raw.push_back(d.labels[i] / hi);
  }
  EXPECT_LT(oracle::ks_uniform(phi), oracle::ks_critical_5pct(phi.size()));
  EXPECT_GT(oracle::ks_uniform(raw), oracle::ks_critical_5pct(raw.size()));
}

TEST(Generator, InvalidSizes) {
  GeneratorSpec g;
  g.n = 0;
  EXPECT_THROW(generate_dataset(g), Error);
  g.n = 10;
  g.feature_dim = 1;
  EXPECT_THROW(generate_dataset(g), Error);
  g.feature_dim = 4;
  g.noise = -1;
  EXPECT_THROW(generate_dataset(g), Error);
}

TEST(Augment, ZeroSigmaIsIdentity) {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd row = Eigen::VectorXd::LinSpaced(5, -1, 1);
  EXPECT_TRUE(augment(row, 0.0, rng) == row);
}

TEST(Augment, Reproducible) {
  const Eigen::VectorXd row = Eigen::VectorXd::Zero(5);
  std::mt19937_64 a(9), b(9);
  EXPECT_TRUE(augment(row, 0.1, a) == augment(row, 0.1, b));
}

TEST(Augment, SampleStandardDeviation) {
  std::mt19937_64 rng(10);
  const Eigen::Index dim = 6;
  const int draws = 10000;
  Eigen::MatrixXd x(draws, dim);
  const Eigen::VectorXd row = Eigen::VectorXd::Constant(dim, 3.0);
  for (int k = 0; k < draws; ++k) x.row(k) = augment(row, 0.1, rng).transpose();
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double mean = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mean).square().sum() / (draws - 1));
    EXPECT_NEAR(sd, 0.1, 0.005) << "coordinate " << c;
  }
}

TEST(Batches, EightByEight) {
  const Dataset d = small_dataset(100);
  const auto batches = batch_iter(d, {8, 8, 1}, 0.05, 0);
  ASSERT_EQ(batches.size(), 13u);  // 12 full, then 4 leftover sources
  for (std::size_t k = 0; k + 1 < batches.size(); ++k) {
    EXPECT_EQ(batches[k].inputs.rows(), 64);
    EXPECT_EQ(std::set<std::int64_t>(batches[k].source_ids.begin(), batches[k].source_ids.end()).size(), 8u);
  }
  EXPECT_EQ(batches.back().inputs.rows(), 32);
}

TEST(Batches, TrailingSingleSourceIsDropped) {
  const Dataset d = small_dataset(17);
  const auto batches = batch_iter(d, {8, 2, 1}, 0.0, 0);
  EXPECT_EQ(batches.size(), 2u);
  EpochBatches e(d, {8, 2, 1}, 0.0, 0);
  EXPECT_EQ(e.batches_per_epoch(), 2u);
}

TEST(Batches, PlainShuffledSlices) {
  const Dataset d = small_dataset(40);
  const auto batches = batch_iter(d, {8, 1, 4}, 0.0, 2);
  std::vector<std::int64_t> seen;
  for (const Batch& b : batches) {
    for (Eigen::Index r = 0; r < b.inputs.rows(); ++r) {
      const auto src = b.source_ids[static_cast<std::size_t>(r)];
      EXPECT_TRUE(b.inputs.row(r) == d.features.row(src));
      EXPECT_EQ(b.labels[r], d.labels[src]);
      seen.push_back(src);
    }
  }
  std::vector<std::int64_t> sorted = seen;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < sorted.size(); ++k) EXPECT_EQ(sorted[k], static_cast<std::int64_t>(k));
  EXPECT_FALSE(std::is_sorted(seen.begin(), seen.end()));
}

TEST(Batches, SameSeedSameSequence) {
  const Dataset d = small_dataset(50);
  const auto a = batch_iter(d, {8, 4, 7}, 0.05, 3);
  const auto b = batch_iter(d, {8, 4, 7}, 0.05, 3);
  const auto c = batch_iter(d, {8, 4, 7}, 0.05, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(a[k].inputs == b[k].inputs);
    EXPECT_EQ(a[k].source_ids, b[k].source_ids);
  }
  EXPECT_FALSE(a[0].inputs == c[0].inputs);
}

TEST(Batches, EveryRowHasAPositiveAndKeepsItsLabel) {
  const Dataset d = small_dataset(60);
  for (const Batch& b : batch_iter(d, {8, 3, 0}, 0.1, 1)) {
    for (Eigen::Index i = 0; i < b.labels.size(); ++i) {
      EXPECT_EQ(b.labels[i], d.labels[b.source_ids[static_cast<std::size_t>(i)]]);
      int same = 0;
      for (Eigen::Index j = 0; j < b.labels.size(); ++j) same += (j != i && b.labels[j] == b.labels[i]) ? 1 : 0;
      EXPECT_GE(same, 2);
    }
  }
}

TEST(Batches, TooSmall) {
  const Dataset d = small_dataset(1);
  EXPECT_THROW(batch_iter(d, {8, 8, 0}, 0.0, 0), Error);
}

TEST(Splits, ProportionsAndDisjointness) {
  Dataset d = small_dataset(200);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.labels[i] = static_cast<double>(i);  // labels as row ids
  const DatasetSplits s = split_dataset(d, 4);
  EXPECT_EQ(s.train.size(), 140);
  EXPECT_EQ(s.val.size(), 30);
  EXPECT_EQ(s.test.size(), 30);
  std::set<double> ids;
  for (const Dataset* part : {&s.train, &s.val, &s.test}) {
    for (Eigen::Index i = 0; i < part->size(); ++i) ids.insert(part->labels[i]);
  }
  EXPECT_EQ(ids.size(), 200u);
  EXPECT_EQ(s.train.split, Split::Train);
}

TEST(Csv, MinimalFile) {
  const fs::path f = temp_file("one.csv");
  std::ofstream(f) << "f0,f1,label\n0.1,0.2,0.5\n";
  const Dataset d = load_csv(f);
  EXPECT_EQ(d.size(), 1);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_EQ(d.labels[0], 0.5);
  EXPECT_EQ(d.features(0, 1), 0.2);
}

TEST(Csv, HeaderMismatchNamesTheColumn) {
  const std::string msg = load_error("f0,g1,label\n1,2,3\n");
  EXPECT_NE(msg.find("g1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column 1"), std::string::npos) << msg;
  EXPECT_NE(load_error("f0,f1,y\n1,2,3\n").find("'y'"), std::string::npos);
}

TEST(Csv, MalformedRowReportsIndex) {
  const std::string msg = load_error("f0,label\n1,2\n3,4\n5,x\n");
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(load_error("f0,label\n1,2\n3\n").find("row 1"), std::string::npos);
}

TEST(Csv, NonFiniteAndMissing) {
  EXPECT_NE(load_error("f0,label\n1,nan\n").find("non-finite"), std::string::npos);
  EXPECT_NE(load_error("f0,label\ninf,1\n").find("non-finite"), std::string::npos);
  const fs::path absent = temp_file("absent.csv");
  try {
    load_csv(absent);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(absent.string()), std::string::npos);
  }
}

TEST(Csv, RoundTrip) {
  GeneratorSpec g;
  g.n = 250;
  g.kind = DatasetKind::Poly;
  const Dataset d = generate_dataset(g);
  const fs::path f = temp_file("round.csv");
  save_csv(f, d);
  const Dataset back = load_csv(f);
  ASSERT_EQ(back.size(), d.size());
  EXPECT_LE((back.features - d.features).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((back.labels - d.labels).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(back.features == d.features);  // shortest round-trip formatting is exact
}

TEST(Sidecar, RoundTrip) {
  const fs::path f = temp_file("side.meta");
  save_sidecar(f, {{"kind", "ring"}, {"n", "10"}});
  const auto kv = load_key_values(f);
  EXPECT_EQ(kv.at("kind"), "ring");
  EXPECT_EQ(kv.at("n"), "10");
}
