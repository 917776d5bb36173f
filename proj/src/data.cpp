#include "lockstep/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "lockstep/csv.hpp"
#include "lockstep/error.hpp"
#include "lockstep/rng.hpp"

namespace lockstep {

void Dataset::validate() const {
  if (rows < 1) throw DimensionError("dataset '" + name + "' is empty");
  if (dim < 1) throw DimensionError("dataset '" + name + "' has zero feature dimension");
  if (features.size() != rows * dim) {
    throw DimensionError("dataset '" + name + "' feature storage does not match rows*dim");
  }
  if (labels.size() != rows) throw DimensionError("dataset '" + name + "' label count != rows");
  if (num_classes > 0) {
    for (double y : labels) {
      if (y < 0 || y >= static_cast<double>(num_classes) || y != std::floor(y)) {
        throw DimensionError("dataset '" + name + "' has label outside [0, C)");
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string new_name) const {
  Dataset out;
  out.name = std::move(new_name);
  out.rows = indices.size();
  out.dim = dim;
  out.num_classes = num_classes;
  out.features.reserve(indices.size() * dim);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= rows) throw DimensionError("subset index out of range");
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("file", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& field) {
  if (bytes.size() < offset + 4) throw ParseError(field, "truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  if (read_be32(images, 0, "images.magic") != kImageMagic) {
    throw ParseError("images.magic", "expected 2051");
  }
  const std::uint32_t count = read_be32(images, 4, "images.count");
  const std::uint32_t rows = read_be32(images, 8, "images.rows");
  const std::uint32_t cols = read_be32(images, 12, "images.cols");
  if (rows == 0) throw ParseError("images.rows", "zero rows");
  if (cols == 0) throw ParseError("images.cols", "zero cols");
  if (count == 0) throw ParseError("images.count", "zero images");
  const std::size_t pixels = std::size_t{rows} * cols;
  if (images.size() < 16 + std::size_t{count} * pixels) {
    throw ParseError("images.pixels", "file truncated: expected " +
                                          std::to_string(16 + std::size_t{count} * pixels) +
                                          " bytes, got " + std::to_string(images.size()));
  }

  if (read_be32(labels, 0, "labels.magic") != kLabelMagic) {
    throw ParseError("labels.magic", "expected 2049");
  }
  const std::uint32_t label_count = read_be32(labels, 4, "labels.count");
  if (label_count != count) {
    throw ParseError("count_mismatch", std::to_string(count) + " images vs " +
                                           std::to_string(label_count) + " labels");
  }
  if (labels.size() < 8 + std::size_t{label_count}) {
    throw ParseError("labels.values", "file truncated");
  }

  Dataset out;
  out.name = "mnist";
  out.rows = count;
  out.dim = pixels;
  out.num_classes = 10;
  out.features.resize(out.rows * out.dim);
  out.labels.resize(out.rows);
  for (std::size_t i = 0; i < out.features.size(); ++i) {
    out.features[i] = static_cast<double>(images[16 + i]) / 255.0;
  }
  for (std::size_t i = 0; i < out.rows; ++i) {
    const unsigned char y = labels[8 + i];
    if (y > 9) throw ParseError("labels.values", "label " + std::to_string(y) + " outside 0-9");
    out.labels[i] = y;
  }
  return out;
}

Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                  double separation, std::uint64_t seed) {
  if (classes < 2) throw DimensionError("gen_blobs: classes must be >= 2");
  if (per_class < 1) throw DimensionError("gen_blobs: per_class must be >= 1");
  if (dim < 1) throw DimensionError("gen_blobs: dim must be >= 1");

  Rng rng(seed);
  std::vector<double> centers(classes * dim);
  for (std::size_t c = 0; c < classes; ++c) {
    double sq = 0.0;
    std::span<double> center(centers.data() + c * dim, dim);
    for (double& v : center) {
      v = rng.normal();
      sq += v * v;
    }
    const double scale = sq > 0.0 ? separation / std::sqrt(sq) : 0.0;
    for (double& v : center) v *= scale;
  }

  Dataset out;
  out.name = "blobs";
  out.rows = classes * per_class;
  out.dim = dim;
  out.num_classes = classes;
  out.features.resize(out.rows * dim);
  out.labels.resize(out.rows);
  std::size_t r = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++r) {
      for (std::size_t j = 0; j < dim; ++j) {
        out.features[r * dim + j] = centers[c * dim + j] + rng.normal();
      }
      out.labels[r] = static_cast<double>(c);
    }
  }
  return out;
}

std::vector<Batch> make_partition(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw DimensionError("make_partition: batch_size must be >= 1");
  if (batch_size > n) {
    throw DimensionError("make_partition: batch_size " + std::to_string(batch_size) +
                         " exceeds n = " + std::to_string(n));
  }
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  const std::size_t count = n / batch_size;
  std::vector<Batch> batches(count);
  for (std::size_t b = 0; b < count; ++b) {
    batches[b].batch_id = static_cast<std::int64_t>(b);
    batches[b].indices.assign(perm.begin() + b * batch_size, perm.begin() + (b + 1) * batch_size);
  }
  return batches;
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < data.dim; ++j) out << 'f' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (double v : data.row(i)) out << format_double(v) << ',';
    out << format_double(data.labels[i]) << '\n';
  }
}

}  // namespace lockstep
