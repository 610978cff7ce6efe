#include "icar/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "icar/dense.hpp"
#include "icar/errors.hpp"
#include "icar/prior.hpp"

namespace icar {

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X_full, std::uint32_t mask) {
  const int k = static_cast<int>(X_full.cols()) - 1;
  Eigen::MatrixXd out(X_full.rows(), 1 + __builtin_popcount(mask));
  out.col(0) = X_full.col(0);
  int c = 1;
  for (int j = 0; j < k; ++j)
    if (mask & (1u << j)) out.col(c++) = X_full.col(j + 1);
  return out;
}

double resolve_b_fraction(const SelectionConfig& cfg, int n, int p_full) {
  if (cfg.b_fraction > 0.0) {
    if (cfg.b_fraction >= 1.0)
      throw InvalidInputError("b fraction must lie in (0, 1)");
    return cfg.b_fraction;
  }
  // Minimum training size m = p + 1 from the full candidate dimension,
  // shared by all models so their fractional marginals are comparable.
  return static_cast<double>(p_full + 1) / static_cast<double>(n);
}

struct RawScore {
  double log_prior = 0.0;
  double log_q = 0.0;
  long quad_evals = 0;
  double quad_rel_error = 0.0;
};

/// Normalizes raw scores in model-index order and assembles the result.
SelectionResult aggregate(const std::vector<RawScore>& raw, int n, int k,
                          double b_frac, const std::vector<std::string>& names) {
  const std::size_t count = raw.size();
  SelectionResult res;
  res.n = n;
  res.k = k;
  res.b_fraction = b_frac;
  res.names = names;
  res.models.resize(count);

  double max_joint = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    res.models[i].spec = model_at(static_cast<std::uint32_t>(i));
    res.models[i].log_prior = raw[i].log_prior;
    res.models[i].log_q = raw[i].log_q;
    res.models[i].quad_evals = raw[i].quad_evals;
    res.models[i].quad_rel_error = raw[i].quad_rel_error;
    max_joint = std::max(max_joint, raw[i].log_prior + raw[i].log_q);
  }

  // Log-sum-exp anchored at the maximum joint mass.
  double denom = 0.0;
  for (std::size_t i = 0; i < count; ++i)
    denom += std::exp(raw[i].log_prior + raw[i].log_q - max_joint);
  const double log_norm = max_joint + std::log(denom);

  res.pip.assign(k, 0.0);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    ModelScore& score = res.models[i];
    score.log_post = score.log_prior + score.log_q - log_norm;
    score.post_prob = std::exp(score.log_post);
    if (score.spec.spatial) res.p_spatial += score.post_prob;
    for (int j = 0; j < k; ++j)
      if (score.spec.mask & (1u << j)) res.pip[j] += score.post_prob;
    if (score.log_post > best) {
      best = score.log_post;
      res.map_index = static_cast<std::uint32_t>(i);
    }
  }

  res.median_mask = 0;
  for (int j = 0; j < k; ++j)
    if (res.pip[j] >= 0.5) res.median_mask |= (1u << j);
  return res;
}

/// Runs `body(index)` for every model index, optionally across threads.
/// Failures abort the run naming the first failing model.
void for_each_model(std::size_t count, int threads,
                    const std::function<void(std::size_t)>& body) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::string> failures(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (const std::exception& e) {
          failures[w] = e.what();
          next.store(count);  // stop the other workers
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (!f.empty()) throw NumericalError(f);
}

}  // namespace

double model_prior(int k, int k_c) {
  return std::exp(log_model_prior(k, k_c));
}

double log_model_prior(int k, int k_c) {
  if (k_c < 0 || k_c > k) throw InvalidInputError("k_c out of range");
  // log C(k, k_c) via lgamma keeps k up to the enumeration cap exact enough;
  // values are exact in rational arithmetic for k <= 12 (checked in tests).
  const double log_choose = std::lgamma(k + 1.0) - std::lgamma(k_c + 1.0) -
                            std::lgamma(k - k_c + 1.0);
  return -std::log(2.0 * (k + 1.0)) - log_choose;
}

SelectionResult enumerate_and_score(const SpectralBasis& basis,
                                    const Dataset& data,
                                    const SelectionConfig& cfg) {
  const int n = data.n();
  const int k = data.k();
  if (k > cfg.exhaustive_limit)
    throw InvalidInputError("k=" + std::to_string(k) +
                            " exceeds the exhaustive enumeration cap of " +
                            std::to_string(cfg.exhaustive_limit));
  if (basis.n() != n)
    throw InvalidInputError("graph order does not match dataset rows");

  const double b_frac = resolve_b_fraction(cfg, n, data.p());
  const SpectralData sd = transform(basis, data);

  // Model-independent log|Omega| on the scan grid, filled before fan-out.
  std::vector<double> scan_log_det(cfg.quad.scan_points);
  for (int i = 0; i < cfg.quad.scan_points; ++i) {
    const double psi = cfg.quad.scan_lo + (cfg.quad.scan_hi - cfg.quad.scan_lo) *
                                              static_cast<double>(i) /
                                              (cfg.quad.scan_points - 1);
    scan_log_det[i] = log_det_omega(basis, std::exp(psi));
  }

  const std::size_t count = 1u << (k + 1);
  std::vector<RawScore> raw(count);

  for_each_model(count, cfg.threads, [&](std::size_t index) {
    const ModelSpec spec = model_at(static_cast<std::uint32_t>(index));
    RawScore& slot = raw[index];
    slot.log_prior = log_model_prior(k, spec.k_c());
    try {
      if (spec.spatial) {
        const Eigen::MatrixXd X_t_c = select_columns(sd.X_t, spec.mask);
        const TracePrior prior(basis, X_t_c);
        const FractionalLikelihoodResult fl = log_fractional_marginal(
            basis, sd.y_t, X_t_c, prior, b_frac, cfg.quad, &scan_log_det);
        slot.log_q = fl.log_q;
        slot.quad_evals = fl.evaluations;
        slot.quad_rel_error = fl.est_rel_error;
      } else {
        const Eigen::MatrixXd X_c = select_columns(data.X_full, spec.mask);
        slot.log_q = log_marginal_independent(data.y, X_c, b_frac);
      }
    } catch (const std::exception& e) {
      throw NumericalError("model mask=" + std::to_string(spec.mask) +
                           (spec.spatial ? " spatial" : " independent") +
                           " failed: " + e.what());
    }
  });

  return aggregate(raw, n, k, b_frac, data.names);
}

SelectionResult kff_path_score(const Dataset& data,
                               const NeighborhoodGraph& graph,
                               const SelectionConfig& cfg) {
  const int n = data.n();
  const int k = data.k();
  if (k > cfg.exhaustive_limit)
    throw InvalidInputError("k exceeds the exhaustive enumeration cap");
  if (graph.n != n)
    throw InvalidInputError("graph order does not match dataset rows");

  const double b_frac = resolve_b_fraction(cfg, n, data.p());
  const PrecisionStructure prec = build_precision(graph);
  const Eigen::MatrixXd H_plus = dense_h_plus(prec.H);

  const std::size_t count = 1u << (k + 1);
  std::vector<RawScore> raw(count);

  for_each_model(count, cfg.threads, [&](std::size_t index) {
    const ModelSpec spec = model_at(static_cast<std::uint32_t>(index));
    RawScore& slot = raw[index];
    slot.log_prior = log_model_prior(k, spec.k_c());
    try {
      const Eigen::MatrixXd X_c = select_columns(data.X_full, spec.mask);
      if (spec.spatial) {
        // Two dense eigendecompositions per model for the prior, dense
        // Omega algebra at every quadrature node for the likelihood.
        const EigenvaluePrior prior(projection_eigenvalues_dense(H_plus, X_c), n);
        const FractionalLikelihoodResult fl = log_fractional_marginal_dense(
            H_plus, data.y, X_c, prior, b_frac, cfg.quad);
        slot.log_q = fl.log_q;
        slot.quad_evals = fl.evaluations;
        slot.quad_rel_error = fl.est_rel_error;
      } else {
        slot.log_q = log_marginal_independent(data.y, X_c, b_frac);
      }
    } catch (const std::exception& e) {
      throw NumericalError("model mask=" + std::to_string(spec.mask) +
                           (spec.spatial ? " spatial" : " independent") +
                           " failed: " + e.what());
    }
  });

  return aggregate(raw, n, k, b_frac, data.names);
}

std::string selection_to_json(const SelectionResult& result) {
  nlohmann::json doc;
  doc["config"] = {{"n", result.n},
                   {"k", result.k},
                   {"b_fraction", result.b_fraction},
                   {"model_count", result.models.size()}};

  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : result.models) {
    models.push_back({{"mask", m.spec.mask},
                      {"spatial", m.spec.spatial},
                      {"log_prior", m.log_prior},
                      {"log_q", m.log_q},
                      {"post_prob", m.post_prob}});
  }
  doc["models"] = std::move(models);

  nlohmann::json pip = nlohmann::json::object();
  for (int j = 0; j < result.k; ++j) {
    const std::string name =
        j < static_cast<int>(result.names.size()) ? result.names[j]
                                                  : "x" + std::to_string(j + 1);
    pip[name] = result.pip[j];
  }
  doc["pip"] = std::move(pip);
  doc["p_spatial"] = result.p_spatial;

  const ModelSpec map_spec = model_at(result.map_index);
  doc["map_model"] = {{"mask", map_spec.mask}, {"spatial", map_spec.spatial}};
  doc["median_model"] = {{"mask", result.median_mask}};
  return doc.dump(2) + "\n";
}

void write_selection_csv(const SelectionResult& result,
                         const std::string& models_path,
                         const std::string& pip_path) {
  {
    std::ofstream out(models_path, std::ios::trunc);
    if (!out) throw InvalidInputError(models_path + ": cannot write");
    out << "index,mask,spatial,k_c,log_prior,log_q,log_post,post_prob\n";
    out.precision(17);
    for (std::size_t i = 0; i < result.models.size(); ++i) {
      const auto& m = result.models[i];
      out << i << ',' << m.spec.mask << ',' << (m.spec.spatial ? 1 : 0) << ','
          << m.spec.k_c() << ',' << m.log_prior << ',' << m.log_q << ','
          << m.log_post << ',' << m.post_prob << '\n';
    }
  }
  {
    std::ofstream out(pip_path, std::ios::trunc);
    if (!out) throw InvalidInputError(pip_path + ": cannot write");
    out << "regressor,pip\n";
    out.precision(17);
    for (int j = 0; j < result.k; ++j) {
      const std::string name =
          j < static_cast<int>(result.names.size()) ? result.names[j]
                                                    : "x" + std::to_string(j + 1);
      out << name << ',' << result.pip[j] << '\n';
    }
  }
}

}  // namespace icar
