#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icar/graph.hpp"
#include "icar/likelihood.hpp"
#include "icar/spectral.hpp"

namespace icar {

/// One candidate model: a subset of the k candidate regressors plus the
/// spatial/independent flag. The intercept is always included and is not
/// part of the mask.
struct ModelSpec {
  std::uint32_t mask = 0;
  bool spatial = false;

  int k_c() const { return __builtin_popcount(mask); }
  int p_c() const { return 1 + k_c(); }
};

/// Enumeration order shared by every consumer: index = 2*mask + spatial.
inline ModelSpec model_at(std::uint32_t index) {
  return ModelSpec{index >> 1, (index & 1u) != 0};
}
inline std::uint32_t model_index(const ModelSpec& m) {
  return (m.mask << 1) | (m.spatial ? 1u : 0u);
}

/// Prior probability P(M_c) = [2(k+1)]^-1 C(k, k_c)^-1.
double model_prior(int k, int k_c);
double log_model_prior(int k, int k_c);

/// log Bayes factor of model c against model a.
inline double log_bayes_factor(double log_q_c, double log_q_a) {
  return log_q_c - log_q_a;
}

struct ModelScore {
  ModelSpec spec;
  double log_prior = 0.0;
  double log_q = 0.0;
  double log_post = 0.0;  // normalized
  double post_prob = 0.0;
  long quad_evals = 0;
  double quad_rel_error = 0.0;
};

struct SelectionConfig {
  double b_fraction = 0.0;  // <= 0 means auto: (p+1)/n from the full design
  QuadratureConfig quad;
  int threads = 1;
  int exhaustive_limit = 20;  // hard cap on k
};

struct SelectionResult {
  std::vector<ModelScore> models;  // in model-index order
  std::vector<double> pip;         // one per candidate regressor
  std::vector<std::string> names;
  double p_spatial = 0.0;
  std::uint32_t map_index = 0;     // model index of the MAP model
  std::uint32_t median_mask = 0;   // regressors with PIP >= 0.5
  double b_fraction = 0.0;
  int n = 0;
  int k = 0;
};

/// Scores all 2^(k+1) candidate models with the fast spectral path:
/// trace-form prior, O(n) likelihood quantities, shared basis. Model
/// scoring may run on `threads` workers; aggregation is performed in
/// model-index order so scheduling cannot change the output.
SelectionResult enumerate_and_score(const SpectralBasis& basis,
                                    const Dataset& data,
                                    const SelectionConfig& cfg);

/// Baseline path: per-model projection eigenvalues feeding the
/// eigenvalue-form prior, and dense likelihood quantities at every
/// quadrature node. O(n^3) per model.
SelectionResult kff_path_score(const Dataset& data,
                               const NeighborhoodGraph& graph,
                               const SelectionConfig& cfg);

/// Canonical JSON document (config, per-model table, PIPs, MAP/median
/// summaries). CSV writers emit one model per row plus a second file for
/// the PIP table.
std::string selection_to_json(const SelectionResult& result);
void write_selection_csv(const SelectionResult& result,
                         const std::string& models_path,
                         const std::string& pip_path);

}  // namespace icar
