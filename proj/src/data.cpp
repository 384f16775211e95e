#include "bayeslista/data.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "bayeslista/error.hpp"
#include "bayeslista/rng.hpp"

namespace bayeslista {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kImageSide = 28;
constexpr char kCacheMagic[5] = {'S', 'S', 'L', 'D', '1'};

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

void put_le64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<std::uint8_t>(in[at + i])) << (8 * i);
  return v;
}

void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_le64(out, std::bit_cast<std::uint64_t>(m(r, c)));
  }
}

Eigen::MatrixXd get_matrix(const std::string& in, std::size_t& at, std::uint64_t rows,
                           std::uint64_t cols) {
  Eigen::MatrixXd m(rows, cols);
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c) {
      m(r, c) = std::bit_cast<double>(get_le64(in, at));
      at += 8;
    }
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Eigen::MatrixXd gen_sparse_targets(Eigen::Index n, Eigen::Index dim, double spike_prob,
                                   double trunc, std::uint64_t seed) {
  if (!(spike_prob >= 0.0 && spike_prob <= 1.0)) {
    throw invalid_argument("gen_sparse_targets: spike probability must lie in [0, 1]");
  }
  if (!(trunc >= 0.0) || trunc > 5.0) {
    throw invalid_argument("gen_sparse_targets: truncation must lie in [0, 5]");
  }
  Rng rng(seed);
  Eigen::MatrixXd B(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (rng.uniform() < spike_prob) {
        B(i, j) = 0.0;
        continue;
      }
      double z;
      do {
        z = rng.normal();
      } while (std::abs(z) < trunc);
      B(i, j) = z;
    }
  }
  return B;
}

Eigen::MatrixXd gen_design(Eigen::Index k, Eigen::Index dim, std::uint64_t seed) {
  if (k < 1 || dim < 1) throw invalid_argument("gen_design: K and D must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd X(k, dim);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) X(r, c) = rng.normal();
  }
  return X;
}

Eigen::MatrixXd gen_observations(const Eigen::MatrixXd& X, const Eigen::MatrixXd& B,
                                 double noise_sd, std::uint64_t seed) {
  if (X.cols() != B.cols()) {
    throw invalid_argument("gen_observations: X has " + std::to_string(X.cols()) +
                           " columns but targets have length " + std::to_string(B.cols()));
  }
  if (!(noise_sd >= 0.0)) throw invalid_argument("gen_observations: noise_sd must be >= 0");
  Eigen::MatrixXd Y = B * X.transpose();
  if (noise_sd > 0.0) {
    Rng rng(seed);
    for (Eigen::Index r = 0; r < Y.rows(); ++r) {
      for (Eigen::Index c = 0; c < Y.cols(); ++c) Y(r, c) += noise_sd * rng.normal();
    }
  }
  return Y;
}

Eigen::MatrixXd parse_mnist_idx(std::span<const std::uint8_t> bytes, PixelScale scale) {
  if (bytes.size() < 4) throw data_error("idx: truncated header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic) {
    throw data_error("idx: expected image magic 0x00000803, found 0x" + [&] {
      char buf[9];
      std::snprintf(buf, sizeof buf, "%08x", magic);
      return std::string(buf);
    }());
  }
  if (bytes.size() < 16) throw data_error("idx: truncated header");
  const std::uint64_t n = read_be32(bytes, 4);
  const std::uint32_t rows = read_be32(bytes, 8);
  const std::uint32_t cols = read_be32(bytes, 12);
  if (rows != kImageSide || cols != kImageSide) {
    throw data_error("idx: dimension mismatch, expected 28 x 28 images, found " +
                     std::to_string(rows) + " x " + std::to_string(cols));
  }
  const std::uint64_t pixels = std::uint64_t(rows) * cols;
  if (bytes.size() - 16 < n * pixels) {
    throw data_error("idx: truncated file, header declares " + std::to_string(n) +
                     " images but payload holds " + std::to_string((bytes.size() - 16) / pixels));
  }
  const double factor = scale == PixelScale::kUnit ? 1.0 / 255.0 : 1.0;
  Eigen::MatrixXd images(n, pixels);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t p = 0; p < pixels; ++p) images(i, p) = factor * bytes[16 + i * pixels + p];
  }
  return images;
}

Eigen::MatrixXd load_mnist_idx(const std::filesystem::path& path, PixelScale scale) {
  const std::string raw = read_file(path);
  return parse_mnist_idx(
      std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), scale);
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  if (ds.Y.rows() != ds.B.rows() || ds.Y.cols() != ds.X.rows() || ds.B.cols() != ds.X.cols()) {
    throw invalid_argument("save_dataset: inconsistent shapes");
  }
  std::string out(kCacheMagic, sizeof kCacheMagic);
  put_le64(out, std::uint64_t(ds.X.rows()));
  put_le64(out, std::uint64_t(ds.X.cols()));
  put_le64(out, std::uint64_t(ds.Y.rows()));
  put_matrix(out, ds.X);
  put_matrix(out, ds.Y);
  put_matrix(out, ds.B);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw data_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string in = read_file(path);
  constexpr std::size_t header = sizeof kCacheMagic + 3 * 8;
  if (in.size() < header || std::memcmp(in.data(), kCacheMagic, sizeof kCacheMagic) != 0) {
    throw data_error(path.string() + ": not a dataset cache (bad magic)");
  }
  const std::uint64_t k = get_le64(in, 5), d = get_le64(in, 13), n = get_le64(in, 21);
  const std::uint64_t expected = header + 8 * (k * d + n * k + n * d);
  if (in.size() != expected) {
    throw data_error(path.string() + ": size " + std::to_string(in.size()) +
                     " does not match header (expected " + std::to_string(expected) + ")");
  }
  std::size_t at = header;
  Dataset ds;
  ds.X = get_matrix(in, at, k, d);
  ds.Y = get_matrix(in, at, n, k);
  ds.B = get_matrix(in, at, n, d);
  return ds;
}

}  // namespace bayeslista
