#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <Eigen/Dense>

namespace bayeslista {

// Pairs {y^(n), beta^(n)} stored as rows of Y and B, with the design used
// to produce them.
struct Dataset {
  Eigen::MatrixXd X;  // K x D
  Eigen::MatrixXd Y;  // N x K
  Eigen::MatrixXd B;  // N x D

  Eigen::Index size() const { return Y.rows(); }
};

enum class PixelScale { kUnit, kRaw };

/// Each entry is 0 with probability spike_prob, otherwise a standard normal
/// draw rejected until |value| >= trunc.
Eigen::MatrixXd gen_sparse_targets(Eigen::Index n, Eigen::Index dim, double spike_prob,
                                   double trunc, std::uint64_t seed);

// i.i.d. N(0, 1) entries, no normalisation.
Eigen::MatrixXd gen_design(Eigen::Index k, Eigen::Index dim, std::uint64_t seed);

// Rows y = X beta + eps with eps ~ N(0, noise_sd^2 I).
Eigen::MatrixXd gen_observations(const Eigen::MatrixXd& X, const Eigen::MatrixXd& B,
                                 double noise_sd, std::uint64_t seed);

/// Reads an IDX unsigned-byte image file (magic 0x00000803, N x 28 x 28)
/// into an N x 784 matrix, row-major pixel order. kUnit divides by 255.
Eigen::MatrixXd load_mnist_idx(const std::filesystem::path& path,
                               PixelScale scale = PixelScale::kUnit);
Eigen::MatrixXd parse_mnist_idx(std::span<const std::uint8_t> bytes,
                                PixelScale scale = PixelScale::kUnit);

/// Flat binary cache: "SSLD1", then K, D, N as little-endian uint64, then
/// row-major little-endian float64 X, Y, B.
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace bayeslista
