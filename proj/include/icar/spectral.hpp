#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "icar/graph.hpp"

namespace icar {

/// Spectral decomposition H = P diag(d) P' shared by every candidate model.
///
/// Eigenvalues are sorted descending with the structural zero stored last
/// and snapped to exactly 0; d_plus holds elementwise reciprocals with a
/// zero in the last slot, so H^+ = P diag(d_plus) P'. Column signs of P are
/// deterministic: the first entry of each column whose magnitude exceeds
/// 1e-12 of the column max is made positive.
struct SpectralBasis {
  Eigen::VectorXd d;
  Eigen::MatrixXd P;
  Eigen::VectorXd d_plus;

  int n() const { return static_cast<int>(d.size()); }
};

/// Data rotated into the spectral coordinates: y_t = P'y, X_t = P'X.
struct SpectralData {
  Eigen::VectorXd y_t;
  Eigen::MatrixXd X_t;
};

/// Full symmetric eigendecomposition of H.
///
/// Requires n >= 2 and a connected graph; a second eigenvalue within
/// 1e-9 * d_1 of zero is reported as a disconnected-graph error.
SpectralBasis decompose(const PrecisionStructure& prec);

/// Rotates the dataset once for the full candidate design.
SpectralData transform(const SpectralBasis& basis, const Dataset& data);

/// Ordered eigenvalues of M*' H^+ M*, where M* spans the unit-eigenvalue
/// space of the projector G = I - X_c (X_c'X_c)^-1 X_c'. This is the
/// O(n^3)-per-model path kept as oracle and benchmark baseline; it performs
/// two dense eigendecompositions per call.
Eigen::VectorXd projection_eigenvalues(const SpectralBasis& basis,
                                       const Eigen::MatrixXd& X_c);

/// As above but taking H^+ directly (lets the baseline path avoid any use
/// of the shared basis).
Eigen::VectorXd projection_eigenvalues_dense(const Eigen::MatrixXd& H_plus,
                                             const Eigen::MatrixXd& X_c);

/// 64-bit FNV-1a over n and the raw entries of H; keys the eigen cache.
std::uint64_t precision_content_hash(const PrecisionStructure& prec);

/// Binary cache of (d, P): header (n, hash), then d, then P column-major,
/// little-endian doubles. load returns nothing on missing file or hash
/// mismatch; save overwrites.
std::optional<SpectralBasis> load_basis_cache(const std::string& path,
                                              std::uint64_t expected_hash);
void save_basis_cache(const std::string& path, std::uint64_t hash,
                      const SpectralBasis& basis);

}  // namespace icar
