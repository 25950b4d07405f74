#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace adacon {

enum class Split { Train, Val, Test, All };

std::string to_string(Split s);

/// Features (N x D, one sample per row) with aligned labels.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
  Split split = Split::All;
  std::map<std::string, std::string> metadata;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  /// Rows `indices` as a new dataset carrying the same metadata.
  Dataset subset(std::span<const Eigen::Index> indices, Split tag) const;
};

enum class DatasetKind { Ring, Poly, Skewed };

/// Latent-to-label maps: identity, a cubic, and the heavy-tailed -log(1 - 0.99 t).
enum class LabelMap { Identity, Cubic, Skewed };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind k);
LabelMap parse_label_map(const std::string& name);
std::string to_string(LabelMap m);
LabelMap default_label_map(DatasetKind k);

double apply_label_map(LabelMap map, double t);

struct GeneratorSpec {
  DatasetKind kind = DatasetKind::Ring;
  Eigen::Index n = 2000;
  Eigen::Index feature_dim = 16;
  double noise = 0.05;
  std::optional<LabelMap> label_map;  // defaults per kind
  std::uint64_t seed = 0;
};

/// Noise-free embedding of latent t in [0, 1] into `dim` coordinates.
///
/// Coordinates come in (cos, sin) pairs of harmonic m = 1, 2, ... of the
/// angle 1.5*pi*t, scaled by 1/m. The first pair traces three quarters of a
/// circle, so the map is injective and the ends of the label range stay apart.
Eigen::VectorXd lift(double t, Eigen::Index dim);

/// Throws Error on n < 1, dim < 2 or noise < 0.
Dataset generate_dataset(const GeneratorSpec& spec);

/// Deterministic dataset from given latents (no noise).
Dataset dataset_from_latents(std::span<const double> latents, Eigen::Index dim, LabelMap map);

/// Additive isotropic Gaussian perturbation.
Eigen::VectorXd augment(const Eigen::VectorXd& row, double sigma, std::mt19937_64& rng);

/// Batch augmentation plan: `base_batch` source samples per batch, each
/// replicated `multiple` times.
struct BatchPlan {
  Eigen::Index base_batch = 8;
  Eigen::Index multiple = 8;
  std::uint64_t shuffle_seed = 0;

  Eigen::Index effective_batch() const { return base_batch * multiple; }
};

struct Batch {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd labels;
  std::vector<std::int64_t> source_ids;  // dataset row index of each replica's source
};

/// One epoch of augmented batches over a dataset.
///
/// Source order is a permutation drawn from (shuffle_seed, epoch_seed). Each
/// batch holds base_batch distinct sources, each replicated `multiple` times
/// (rows grouped by source) with independent augmentation. A trailing partial
/// batch is emitted when it has at least two sources.
class EpochBatches {
 public:
  EpochBatches(const Dataset& data, BatchPlan plan, double sigma_aug, std::uint64_t epoch_seed);

  std::optional<Batch> next();
  std::size_t batches_per_epoch() const;

 private:
  const Dataset& data_;
  BatchPlan plan_;
  double sigma_;
  std::vector<Eigen::Index> order_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

/// All batches of one epoch. Throws Error("dataset too small") for N < 2.
std::vector<Batch> batch_iter(const Dataset& data, BatchPlan plan, double sigma_aug, std::uint64_t epoch_seed);

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// 70/15/15 split by shuffled source index.
DatasetSplits split_dataset(const Dataset& data, std::uint64_t seed);

/// CSV with header f0,...,f{D-1},label. Values written with round-trip precision.
void save_csv(const std::filesystem::path& path, const Dataset& data);
Dataset load_csv(const std::filesystem::path& path);

/// key=value lines, one per metadata entry.
void save_sidecar(const std::filesystem::path& path, const std::map<std::string, std::string>& values);
std::map<std::string, std::string> load_key_values(const std::filesystem::path& path);

}  // namespace adacon
