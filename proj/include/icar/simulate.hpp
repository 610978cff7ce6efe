#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "icar/graph.hpp"
#include "icar/selection.hpp"

namespace icar {

enum class GraphKind { Chain, Grid, File };

/// Chain 1-2-...-n with unit weights.
NeighborhoodGraph chain_graph(int n);

/// rows x cols lattice with rook adjacency and unit weights.
NeighborhoodGraph grid_graph(int rows, int cols);

/// Near-square rows x cols factorization of n (falls back to a chain when
/// n is prime).
NeighborhoodGraph grid_graph_for(int n);

class Rng;

/// Random spanning tree plus extra edges with the given probability;
/// weights uniform in [0.5, 2]. Always connected.
NeighborhoodGraph random_connected_graph(Rng& rng, int n, double extra_edge_prob);

struct SimConfig {
  int n = 100;
  GraphKind graph_kind = GraphKind::Chain;
  double tau = 0.3;
  double sigma2 = 1.0;
  Eigen::VectorXd beta;  // length k+1, intercept first
  int k = 5;
  std::uint64_t seed = 1;
};

struct SimTruth {
  Eigen::VectorXd beta;
  double tau = 0.0;
  double sigma2 = 0.0;
  Eigen::VectorXd phi;
};

struct Simulated {
  Dataset data;
  NeighborhoodGraph graph;
  SimTruth truth;
};

/// Draws a dataset from the hierarchical model: regressors iid standard
/// normal then centered to sum to zero, spectral random-effect coefficients
/// xi_i ~ N(0, sigma2/(tau d_i)) with xi_n = 0, phi = P xi, and
/// y = X beta + phi + eps. Same seed, same bytes.
Simulated simulate_dataset(const SimConfig& cfg);

/// Same draw on a caller-supplied graph (cfg.n must match graph.n).
Simulated simulate_on_graph(const NeighborhoodGraph& graph, const SimConfig& cfg);

enum class BenchMethod { Fast, Kff, Both };

struct BenchmarkRow {
  int n = 0;
  int k = 0;
  std::string method;
  int threads = 1;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

struct BenchmarkConfig {
  std::vector<int> n_grid;
  int k = 5;
  BenchMethod method = BenchMethod::Both;
  std::uint64_t seed = 1;
  int kff_max_n = 1500;  // KFF runs are skipped above this size
  int threads = 1;
  SelectionConfig selection;
};

/// For each n: simulate once, run full selection per method, record wall
/// time (one warm-up discarded, median of 3). Sizes where the KFF path is
/// capped are omitted from its rows.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg);

std::string benchmark_to_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace icar
