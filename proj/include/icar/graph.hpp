#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace icar {

/// One undirected edge with a nonnegative similarity weight.
/// Vertices are 0-based internally; input files are 1-based.
struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
};

/// Undirected weighted neighborhood graph over n subregions.
///
/// Invariants enforced by the loaders / validate():
///   - each undirected edge stored once, i < j, no self-loops
///   - weights nonnegative
///   - the graph is connected over positive-weight edges
struct NeighborhoodGraph {
  int n = 0;
  std::vector<Edge> edges;

  /// True iff every vertex is reachable from vertex 0 over positive-weight
  /// edges. A single vertex with no edges counts as connected.
  bool connected() const;

  /// Throws InvalidInputError on any violated structural invariant.
  void validate() const;
};

/// Precision structure of the ICAR field: H has row sums zero, diagonal
/// equal to each vertex's total similarity, and -g_ij off the diagonal.
struct PrecisionStructure {
  Eigen::MatrixXd H;
};

/// Observations and full candidate design. X_full has the intercept as
/// column 0 followed by the k = p-1 candidate regressors; `names` labels
/// the regressor columns (not the intercept).
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X_full;
  std::vector<std::string> names;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X_full.cols()); }
  int k() const { return p() - 1; }
};

enum class AdjacencyFormat { EdgeList, MatrixCsv };

/// Reads an adjacency file.
///
/// Edge-list format: one edge per line, "i j [w]" whitespace separated,
/// 1-based indices, optional weight defaulting to 1.0, '#' comments.
/// Matrix-csv format: n x n numeric CSV of similarities with zero diagonal;
/// symmetry is required within 1e-12 relative.
///
/// Duplicate undirected edges must carry equal weights; conflicting
/// duplicates are an error rather than last-wins.
NeighborhoodGraph load_adjacency(const std::string& path, AdjacencyFormat format);

/// Parses edge-list / matrix-csv content from a string (used by the file
/// loaders; exposed for tests).
NeighborhoodGraph parse_edge_list(const std::string& text, const std::string& origin);
NeighborhoodGraph parse_matrix_csv(const std::string& text, const std::string& origin);

/// Builds H from a validated graph: (H)_ii = sum_j g_ij, (H)_ij = -g_ij.
PrecisionStructure build_precision(const NeighborhoodGraph& g);

/// Connectivity over positive-weight edges.
bool check_connected(const NeighborhoodGraph& g);

/// Loads a CSV with a header row, extracts `response` and the named
/// regressor columns, and prepends the intercept. Row order is the
/// subregion index order of the paired adjacency file.
///
/// Errors: missing column, non-numeric cell, rank-deficient design, n <= p.
Dataset load_dataset(const std::string& path, const std::string& response,
                     const std::vector<std::string>& regressors);

/// Same as load_dataset but reading from an in-memory string.
Dataset parse_dataset(const std::string& text, const std::string& origin,
                      const std::string& response,
                      const std::vector<std::string>& regressors);

/// Column names of a CSV header (used for --regressors all).
std::vector<std::string> csv_header(const std::string& path);

}  // namespace icar
