#include "icar/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "icar/errors.hpp"

extern "C" void dsyevd_(const char* jobz, const char* uplo, const int* n,
                        double* a, const int* lda, double* w, double* work,
                        const int* lwork, int* iwork, const int* liwork,
                        int* info);

namespace icar {

namespace {

/// Full symmetric eigendecomposition, eigenvalues ascending on output.
void symmetric_eigen(const Eigen::MatrixXd& A, Eigen::VectorXd& values,
                     Eigen::MatrixXd& vectors) {
  const int n = static_cast<int>(A.rows());
  vectors = A;  // column-major, overwritten with eigenvectors
  values.resize(n);
  int info = 0;
  int lwork = -1, liwork = -1;
  double work_query = 0.0;
  int iwork_query = 0;
  dsyevd_("V", "L", &n, vectors.data(), &n, values.data(), &work_query, &lwork,
          &iwork_query, &liwork, &info);
  if (info != 0) throw NumericalError("eigensolver workspace query failed");
  lwork = static_cast<int>(work_query);
  liwork = iwork_query;
  std::vector<double> work(static_cast<std::size_t>(lwork));
  std::vector<int> iwork(static_cast<std::size_t>(liwork));
  dsyevd_("V", "L", &n, vectors.data(), &n, values.data(), work.data(), &lwork,
          iwork.data(), &liwork, &info);
  if (info != 0)
    throw NumericalError("symmetric eigensolver failed (info=" + std::to_string(info) + ")");
}

/// Deterministic sign convention: first entry with magnitude above
/// 1e-12 * max|column| is made positive.
void normalize_column_signs(Eigen::MatrixXd& P) {
  for (int c = 0; c < P.cols(); ++c) {
    const double scale = P.col(c).cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (int r = 0; r < P.rows(); ++r) {
      if (std::abs(P(r, c)) > 1e-12 * scale) {
        if (P(r, c) < 0.0) P.col(c) = -P.col(c);
        break;
      }
    }
  }
}

}  // namespace

SpectralBasis decompose(const PrecisionStructure& prec) {
  const int n = static_cast<int>(prec.H.rows());
  if (n < 2) throw InvalidInputError("spectral decomposition requires n >= 2");

  Eigen::VectorXd w;
  Eigen::MatrixXd v;
  symmetric_eigen(prec.H, w, v);  // ascending

  SpectralBasis basis;
  basis.d.resize(n);
  basis.P.resize(n, n);
  for (int i = 0; i < n; ++i) {  // flip to descending
    basis.d(i) = w(n - 1 - i);
    basis.P.col(i) = v.col(n - 1 - i);
  }

  const double d1 = basis.d(0);
  if (!(d1 > 0.0)) throw NumericalError("largest eigenvalue of H is not positive");
  if (n > 2 && basis.d(n - 2) <= 1e-9 * d1)
    throw InvalidInputError(
        "null eigenvalue of H has multiplicity > 1: graph is effectively disconnected");
  // The structural zero is the smallest eigenvalue; snap it exactly.
  basis.d(n - 1) = 0.0;

  normalize_column_signs(basis.P);

  basis.d_plus.resize(n);
  for (int i = 0; i + 1 < n; ++i) basis.d_plus(i) = 1.0 / basis.d(i);
  basis.d_plus(n - 1) = 0.0;

  // The null eigenvector must be the constant direction.
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r) {
    if (std::abs(basis.P(r, n - 1) - inv_sqrt_n) > 1e-8)
      throw NumericalError("null eigenvector of H deviates from the constant vector");
  }
  return basis;
}

SpectralData transform(const SpectralBasis& basis, const Dataset& data) {
  if (data.n() != basis.n())
    throw InvalidInputError("dataset has " + std::to_string(data.n()) +
                            " rows but the graph has " + std::to_string(basis.n()) +
                            " vertices");
  SpectralData sd;
  sd.y_t = basis.P.transpose() * data.y;
  sd.X_t = basis.P.transpose() * data.X_full;
  return sd;
}

Eigen::VectorXd projection_eigenvalues_dense(const Eigen::MatrixXd& H_plus,
                                             const Eigen::MatrixXd& X_c) {
  const int n = static_cast<int>(H_plus.rows());
  const int p = static_cast<int>(X_c.cols());
  if (n - p <= 0) throw InvalidInputError("projection eigenvalues need n > p");

  Eigen::LDLT<Eigen::MatrixXd> xtx(X_c.transpose() * X_c);
  if (xtx.info() != Eigen::Success || (xtx.vectorD().array() <= 0.0).any())
    throw InvalidInputError("rank-deficient design in projection eigenvalues");

  Eigen::MatrixXd G = Eigen::MatrixXd::Identity(n, n) -
                      X_c * xtx.solve(X_c.transpose());

  Eigen::VectorXd g_values;
  Eigen::MatrixXd g_vectors;
  symmetric_eigen(G, g_values, g_vectors);  // ascending; eigenvalues are 0 or 1

  // Unit eigenvalues are classified as > 0.5, which avoids tolerance tuning.
  Eigen::MatrixXd M_star(n, n - p);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (g_values(i) > 0.5) {
      if (count == n - p) throw NumericalError("projector has too many unit eigenvalues");
      M_star.col(count++) = g_vectors.col(i);
    }
  }
  if (count != n - p)
    throw NumericalError("projector rank mismatch: got " + std::to_string(count) +
                         " unit eigenvalues, expected " + std::to_string(n - p));

  Eigen::MatrixXd reduced = M_star.transpose() * H_plus * M_star;
  reduced = 0.5 * (reduced + reduced.transpose());

  Eigen::VectorXd lam;
  Eigen::MatrixXd dummy;
  symmetric_eigen(reduced, lam, dummy);
  return lam.reverse();  // descending
}

Eigen::VectorXd projection_eigenvalues(const SpectralBasis& basis,
                                       const Eigen::MatrixXd& X_c) {
  const Eigen::MatrixXd H_plus =
      basis.P * basis.d_plus.asDiagonal() * basis.P.transpose();
  return projection_eigenvalues_dense(H_plus, X_c);
}

std::uint64_t precision_content_hash(const PrecisionStructure& prec) {
  const std::uint64_t prime = 1099511628211ULL;
  std::uint64_t h = 14695981039346656037ULL;
  auto mix_bytes = [&](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= prime;
    }
  };
  const std::int64_t n = prec.H.rows();
  mix_bytes(&n, sizeof(n));
  mix_bytes(prec.H.data(), sizeof(double) * static_cast<std::size_t>(n * n));
  return h;
}

namespace {
constexpr char kCacheMagic[8] = {'I', 'C', 'A', 'R', 'E', 'I', 'G', '1'};
}

std::optional<SpectralBasis> load_basis_cache(const std::string& path,
                                              std::uint64_t expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::int64_t n = 0;
  std::uint64_t hash = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
  if (!in || std::memcmp(magic, kCacheMagic, 8) != 0 || hash != expected_hash || n < 2)
    return std::nullopt;
  SpectralBasis basis;
  basis.d.resize(n);
  basis.P.resize(n, n);
  in.read(reinterpret_cast<char*>(basis.d.data()), sizeof(double) * n);
  in.read(reinterpret_cast<char*>(basis.P.data()), sizeof(double) * n * n);
  if (!in) return std::nullopt;
  basis.d_plus.resize(n);
  for (int i = 0; i + 1 < n; ++i) basis.d_plus(i) = 1.0 / basis.d(i);
  basis.d_plus(n - 1) = 0.0;
  return basis;
}

void save_basis_cache(const std::string& path, std::uint64_t hash,
                      const SpectralBasis& basis) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInputError(path + ": cannot write eigen cache");
  const std::int64_t n = basis.n();
  out.write(kCacheMagic, 8);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
  out.write(reinterpret_cast<const char*>(basis.d.data()), sizeof(double) * n);
  out.write(reinterpret_cast<const char*>(basis.P.data()), sizeof(double) * n * n);
}

}  // namespace icar
