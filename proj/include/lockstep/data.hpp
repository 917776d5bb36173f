#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lockstep {

/// Row-major feature matrix plus one label per row. `num_classes` is 0 for
/// regression targets; otherwise every label is an integer in [0, num_classes).
struct Dataset {
  std::string name;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;  // rows * dim
  std::vector<double> labels;    // rows

  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }

  /// Throws DimensionError when the invariants do not hold.
  void validate() const;

  /// New dataset holding the given rows in the given order.
  Dataset subset(std::span<const std::size_t> indices, std::string new_name) const;
};

/// A fixed minibatch: an identifier plus dataset row indices.
struct Batch {
  std::int64_t batch_id = 0;
  std::vector<std::size_t> indices;
};

/// Reads an IDX image/label pair. Pixels are scaled to [0, 1].
/// Errors are ParseError with field() one of "images.magic", "images.count",
/// "images.rows", "images.cols", "images.pixels", "labels.magic",
/// "labels.count", "labels.values", "count_mismatch", or "file".
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

/// Gaussian clusters of unit variance around random directions on the unit
/// sphere scaled by `separation`. Rows are grouped by class.
Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                  double separation, std::uint64_t seed);

/// Shuffles [0, n) with `seed` and cuts floor(n / batch_size) batches of exactly
/// batch_size; the remainder rows are dropped. Batch ids are 0..K-1.
std::vector<Batch> make_partition(std::size_t n, std::size_t batch_size, std::uint64_t seed);

/// Writes `f0,...,f{d-1},label` followed by one row per example.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace lockstep
