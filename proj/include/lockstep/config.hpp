#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lockstep/kernels.hpp"
#include "lockstep/mlp.hpp"
#include "lockstep/sequential.hpp"

namespace lockstep {

struct MnistSource {
  std::string images;
  std::string labels;
  std::size_t subset_n = 10000;  // 0 = use every row
  std::string test_images;       // optional official test files
  std::string test_labels;
};

struct BlobsSource {
  std::size_t classes = 10;
  std::size_t per_class = 1000;
  std::size_t dim = 64;
  double separation = 3.0;
  std::uint64_t seed = 0;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{256};
  Activation activation = Activation::relu;
  LossKind loss = LossKind::softmax_cross_entropy;
};

struct ProbeConfig {
  bool enabled = true;
  std::int64_t cadence = 1;
  std::int64_t recent_max_age = 1;
  std::optional<std::int64_t> ancient_min_age;  // default floor(K / 2)
  std::int64_t probes_per_category = 1;
  std::optional<std::uint64_t> rng_seed;        // default derived from the run seed
  std::int64_t warmup_epochs = 1;               // excluded from ordering statistics
};

struct AuditConfig {
  std::int64_t every_k_steps = 100;
  AuditMode mode = AuditMode::sampled;
  std::size_t sample_size = 256;
  std::size_t d_max = 20000;
};

enum class BatchOrder { cyclic, shuffled };

/// Everything that determines a training run. Serialized verbatim into
/// report.json.
///
/// File format: one JSON object. Top-level scalars plus the nested objects
/// "dataset", "model", "probe" and "audit". Unknown keys anywhere are errors.
struct RunConfig {
  std::variant<BlobsSource, MnistSource> dataset = BlobsSource{};
  ModelConfig model;
  double eta = 0.1;
  std::size_t batch_size = 100;
  std::int64_t epochs = 5;
  std::uint64_t seed = 0;
  BatchOrder order = BatchOrder::cyclic;
  ProbeConfig probe;
  std::optional<AuditConfig> audit;
  double test_split_fraction = 0.1;
  std::string out_dir = "run";

  /// Throws ConfigError on any violated precondition.
  void validate() const;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace lockstep
