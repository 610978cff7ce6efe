#include <CLI11.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "icar/errors.hpp"
#include "icar/graph.hpp"
#include "icar/likelihood.hpp"
#include "icar/prior.hpp"
#include "icar/selection.hpp"
#include "icar/simulate.hpp"
#include "icar/spectral.hpp"

namespace {

using namespace icar;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNumerical = 3;

std::vector<int> parse_n_grid(const std::string& spec) {
  int start = 0, stop = 0, step = 0;
  if (std::sscanf(spec.c_str(), "%d:%d:%d", &start, &stop, &step) != 3 ||
      start < 1 || stop < start || step < 1)
    throw InvalidInputError("--n-grid expects start:stop:step with positive values");
  std::vector<int> grid;
  for (int n = start; n <= stop; n += step) grid.push_back(n);
  return grid;
}

Eigen::VectorXd parse_beta(const std::string& list, int k) {
  std::vector<double> vals;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (...) {
      throw InvalidInputError("--beta expects a comma-separated numeric list");
    }
  }
  if (static_cast<int>(vals.size()) != k + 1)
    throw InvalidInputError("--beta needs k+1 values (intercept first), got " +
                            std::to_string(vals.size()));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

std::vector<std::string> parse_regressors(const std::string& arg,
                                          const std::string& data_path,
                                          const std::string& response) {
  if (arg == "all") {
    std::vector<std::string> out;
    for (const auto& name : csv_header(data_path))
      if (name != response) out.push_back(name);
    return out;
  }
  std::vector<std::string> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidInputError(path + ": cannot write");
  out << text;
}

void print_selection_summary(const SelectionResult& res) {
  std::vector<std::size_t> order(res.models.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return res.models[a].post_prob > res.models[b].post_prob;
  });

  std::printf("top models (of %zu):\n", res.models.size());
  std::printf("  %-12s %-9s %-10s %s\n", "mask", "spatial", "post_prob", "regressors");
  const std::size_t shown = std::min<std::size_t>(10, order.size());
  for (std::size_t r = 0; r < shown; ++r) {
    const ModelScore& m = res.models[order[r]];
    std::string regs;
    for (int j = 0; j < res.k; ++j)
      if (m.spec.mask & (1u << j)) {
        if (!regs.empty()) regs += "+";
        regs += j < static_cast<int>(res.names.size()) ? res.names[j]
                                                       : "x" + std::to_string(j + 1);
      }
    if (regs.empty()) regs = "(intercept)";
    std::printf("  %-12u %-9s %-10.6f %s\n", m.spec.mask,
                m.spec.spatial ? "yes" : "no", m.post_prob, regs.c_str());
  }
  std::printf("\nposterior inclusion probabilities:\n");
  for (int j = 0; j < res.k; ++j) {
    const std::string name = j < static_cast<int>(res.names.size())
                                 ? res.names[j]
                                 : "x" + std::to_string(j + 1);
    std::printf("  %-24s %.6f\n", name.c_str(), res.pip[j]);
  }
  std::printf("\np(spatial) = %.6f\n", res.p_spatial);
  const ModelSpec map_spec = model_at(res.map_index);
  std::printf("MAP model: mask=%u spatial=%s\n", map_spec.mask,
              map_spec.spatial ? "yes" : "no");
  std::printf("median model: mask=%u\n", res.median_mask);
}

NeighborhoodGraph load_graph_arg(const std::string& path, const std::string& format) {
  if (format == "matrix-csv") return load_adjacency(path, AdjacencyFormat::MatrixCsv);
  if (format == "edge-list") return load_adjacency(path, AdjacencyFormat::EdgeList);
  throw InvalidInputError("--adjacency-format must be edge-list or matrix-csv");
}

int cmd_select(const std::string& adjacency, const std::string& adjacency_format,
               const std::string& data_path, const std::string& response,
               const std::string& regressors_arg, const std::string& format,
               std::string output, double quad_tol, const std::string& b_fraction,
               int threads, const std::string& eigen_cache) {
  const NeighborhoodGraph graph = load_graph_arg(adjacency, adjacency_format);
  const std::vector<std::string> regressors =
      parse_regressors(regressors_arg, data_path, response);
  const Dataset data = load_dataset(data_path, response, regressors);
  if (data.n() != graph.n)
    throw InvalidInputError("data has " + std::to_string(data.n()) +
                            " rows but the adjacency file has " +
                            std::to_string(graph.n) + " subregions");

  SelectionConfig cfg;
  cfg.quad.rel_tol = quad_tol;
  cfg.threads = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  if (b_fraction != "auto") {
    try {
      cfg.b_fraction = std::stod(b_fraction);
    } catch (...) {
      throw InvalidInputError("--b-fraction must be 'auto' or a number in (0,1)");
    }
  }

  const PrecisionStructure prec = build_precision(graph);
  std::optional<SpectralBasis> basis;
  if (!eigen_cache.empty()) {
    const std::uint64_t hash = precision_content_hash(prec);
    basis = load_basis_cache(eigen_cache, hash);
    if (!basis) {
      basis = decompose(prec);
      save_basis_cache(eigen_cache, hash, *basis);
    }
  } else {
    basis = decompose(prec);
  }

  const SelectionResult res = enumerate_and_score(*basis, data, cfg);

  if (format == "json") {
    if (output.empty()) output = "selection.json";
    write_text(output, selection_to_json(res));
  } else if (format == "csv") {
    if (output.empty()) output = "selection";
    write_selection_csv(res, output + ".models.csv", output + ".pips.csv");
  } else {
    throw InvalidInputError("--format must be json or csv");
  }
  print_selection_summary(res);
  return kExitOk;
}

int cmd_simulate(int n, int k, const std::string& graph_kind,
                 const std::string& adjacency, const std::string& adjacency_format,
                 double tau, double sigma2, const std::string& beta_arg,
                 std::uint64_t seed, const std::string& output,
                 std::string adjacency_out, std::string truth_out) {
  SimConfig cfg;
  cfg.n = n;
  cfg.k = k;
  cfg.tau = tau;
  cfg.sigma2 = sigma2;
  cfg.seed = seed;
  cfg.beta = beta_arg.empty() ? [&] {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
    for (int i = 0; i < std::min(3, k + 1); ++i) b(i) = 1.0;
    return b;
  }() : parse_beta(beta_arg, k);

  Simulated sim;
  if (graph_kind == "chain") {
    cfg.graph_kind = GraphKind::Chain;
    sim = simulate_dataset(cfg);
  } else if (graph_kind == "grid") {
    cfg.graph_kind = GraphKind::Grid;
    sim = simulate_dataset(cfg);
  } else if (graph_kind == "file") {
    if (adjacency.empty())
      throw InvalidInputError("--graph file requires --adjacency");
    const NeighborhoodGraph graph = load_graph_arg(adjacency, adjacency_format);
    cfg.graph_kind = GraphKind::File;
    cfg.n = graph.n;
    sim = simulate_on_graph(graph, cfg);
  } else {
    throw InvalidInputError("--graph must be chain, grid or file");
  }
  const int sim_n = cfg.n;

  std::ostringstream csv;
  csv.precision(17);
  csv << "y";
  for (int j = 1; j <= k; ++j) csv << ",x" << j;
  csv << ",phi\n";
  for (int i = 0; i < sim_n; ++i) {
    csv << sim.data.y(i);
    for (int j = 1; j <= k; ++j) csv << ',' << sim.data.X_full(i, j);
    csv << ',' << sim.truth.phi(i) << '\n';
  }
  write_text(output, csv.str());

  if (adjacency_out.empty()) adjacency_out = output + ".adj";
  std::ostringstream adj;
  adj << "# " << graph_kind << " graph, n=" << sim_n << "\n";
  for (const Edge& e : sim.graph.edges)
    adj << (e.i + 1) << ' ' << (e.j + 1) << ' ' << e.weight << '\n';
  write_text(adjacency_out, adj.str());

  if (!truth_out.empty()) {
    nlohmann::json truth;
    truth["tau"] = sim.truth.tau;
    truth["sigma2"] = sim.truth.sigma2;
    truth["beta"] = std::vector<double>(sim.truth.beta.data(),
                                        sim.truth.beta.data() + sim.truth.beta.size());
    truth["phi"] = std::vector<double>(sim.truth.phi.data(),
                                       sim.truth.phi.data() + sim.truth.phi.size());
    truth["seed"] = seed;
    write_text(truth_out, truth.dump(2) + "\n");
  }
  std::printf("wrote %s (%d rows, %d regressors) and %s\n", output.c_str(), sim_n, k,
              adjacency_out.c_str());
  return kExitOk;
}

int cmd_benchmark(const std::string& n_grid, int k, const std::string& method,
                  int kff_max_n, int threads, std::uint64_t seed,
                  const std::string& output) {
  BenchmarkConfig cfg;
  cfg.n_grid = parse_n_grid(n_grid);
  cfg.k = k;
  cfg.kff_max_n = kff_max_n;
  cfg.threads = threads;
  cfg.seed = seed;
  if (method == "fast") cfg.method = BenchMethod::Fast;
  else if (method == "kff") cfg.method = BenchMethod::Kff;
  else if (method == "both") cfg.method = BenchMethod::Both;
  else throw InvalidInputError("--method must be fast, kff or both");

  const std::vector<BenchmarkRow> rows = run_benchmark(cfg);
  const std::string csv = benchmark_to_csv(rows);
  if (!output.empty()) write_text(output, csv);
  std::fputs(csv.c_str(), stdout);
  return kExitOk;
}

int cmd_prior_eval(int n, const std::string& graph_kind, const std::string& adjacency,
                   const std::string& adjacency_format, double tau_min, double tau_max,
                   int tau_points, const std::string& form, const std::string& output) {
  NeighborhoodGraph graph;
  if (!adjacency.empty()) {
    graph = load_graph_arg(adjacency, adjacency_format);
  } else if (graph_kind == "chain") {
    graph = chain_graph(n);
  } else if (graph_kind == "grid") {
    graph = grid_graph_for(n);
  } else {
    throw InvalidInputError("--graph must be chain or grid, or pass --adjacency");
  }
  if (!(tau_min > 0.0) || !(tau_max > tau_min) || tau_points < 2)
    throw InvalidInputError("need 0 < tau-min < tau-max and at least 2 points");

  const SpectralBasis basis = decompose(build_precision(graph));
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(graph.n, 1);

  std::unique_ptr<TauLogPrior> prior;
  if (form == "trace") {
    prior = std::make_unique<TracePrior>(basis, basis.P.transpose() * X);
  } else if (form == "eigen") {
    prior = std::make_unique<EigenvaluePrior>(projection_eigenvalues(basis, X), graph.n);
  } else {
    throw InvalidInputError("--form must be trace or eigen");
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "tau,log_prior\n";
  for (int i = 0; i < tau_points; ++i) {
    const double frac = static_cast<double>(i) / (tau_points - 1);
    const double tau =
        std::exp(std::log(tau_min) + frac * (std::log(tau_max) - std::log(tau_min)));
    csv << tau << ',' << prior->log_unnormalized(tau) << '\n';
  }
  if (!output.empty()) write_text(output, csv.str());
  else std::fputs(csv.str().c_str(), stdout);
  return kExitOk;
}

int cmd_prior_check(std::uint64_t seed, int instances, double fault) {
  EquivalenceSweepConfig cfg;
  cfg.seed = seed;
  cfg.instances = instances;
  cfg.fault_eps = fault;
  const EquivalenceSweepResult res = run_equivalence_sweep(cfg);
  std::printf("instances: %d\nevaluations: %d\nmax relative discrepancy: %.3e\n",
              res.instances, res.evaluations, res.max_rel_discrepancy);
  if (res.max_rel_discrepancy > 1e-8) {
    std::printf("FAIL: trace/eigenvalue/W-oracle priors disagree beyond 1e-8\n");
    return kExitCheckFailed;
  }
  std::printf("OK: all prior forms agree within 1e-8\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Objective Bayes variable selection for ICAR spatial models"};
  app.require_subcommand(1);

  // select
  auto* select = app.add_subcommand("select", "Score all candidate models on a dataset");
  std::string sel_adj, sel_adj_format = "edge-list", sel_data, sel_response;
  std::string sel_regressors = "all", sel_format = "json", sel_output;
  std::string sel_b = "auto", sel_cache;
  double sel_quad_tol = 1e-8;
  int sel_threads = 0;
  select->add_option("--adjacency", sel_adj, "Adjacency file")->required();
  select->add_option("--adjacency-format", sel_adj_format, "edge-list|matrix-csv");
  select->add_option("--data", sel_data, "Data CSV with header")->required();
  select->add_option("--response", sel_response, "Response column name")->required();
  select->add_option("--regressors", sel_regressors, "Comma list or 'all'");
  select->add_option("--format", sel_format, "json|csv");
  select->add_option("--output", sel_output, "Output path (json) or base name (csv)");
  select->add_option("--quad-tol", sel_quad_tol, "Quadrature relative tolerance");
  select->add_option("--b-fraction", sel_b, "'auto' or a value in (0,1)");
  select->add_option("--threads", sel_threads, "Worker threads (0 = all cores)");
  select->add_option("--eigen-cache", sel_cache, "Binary cache path for (d, P)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic dataset");
  int sim_n = 100, sim_k = 5;
  std::string sim_graph = "chain", sim_beta, sim_output = "simulated.csv";
  std::string sim_adjacency, sim_adj_format = "edge-list";
  std::string sim_adj_out, sim_truth_out;
  double sim_tau = 0.3, sim_sigma2 = 1.0;
  std::uint64_t sim_seed = 1;
  simulate->add_option("--n", sim_n, "Number of subregions");
  simulate->add_option("--k", sim_k, "Candidate regressor count");
  simulate->add_option("--graph", sim_graph, "chain|grid|file");
  simulate->add_option("--adjacency", sim_adjacency, "Graph file for --graph file");
  simulate->add_option("--adjacency-format", sim_adj_format, "edge-list|matrix-csv");
  simulate->add_option("--tau", sim_tau, "Noise-to-signal ratio");
  simulate->add_option("--sigma2", sim_sigma2, "Error variance");
  simulate->add_option("--beta", sim_beta, "Comma list of k+1 coefficients");
  simulate->add_option("--seed", sim_seed, "RNG seed");
  simulate->add_option("--output", sim_output, "Data CSV path");
  simulate->add_option("--adjacency-out", sim_adj_out, "Edge list path (default <output>.adj)");
  simulate->add_option("--truth-out", sim_truth_out, "Truth record JSON path");

  // benchmark
  auto* benchmark = app.add_subcommand("benchmark", "Time fast vs KFF selection");
  std::string ben_grid = "100:500:100", ben_method = "both", ben_output;
  int ben_k = 5, ben_kff_max = 1500, ben_threads = 1;
  std::uint64_t ben_seed = 1;
  benchmark->add_option("--n-grid", ben_grid, "start:stop:step");
  benchmark->add_option("--k", ben_k, "Candidate regressor count");
  benchmark->add_option("--method", ben_method, "fast|kff|both");
  benchmark->add_option("--kff-max-n", ben_kff_max, "Skip KFF above this n");
  benchmark->add_option("--threads", ben_threads, "Engine threads (default 1)");
  benchmark->add_option("--seed", ben_seed, "RNG seed");
  benchmark->add_option("--output", ben_output, "CSV output path");

  // prior-eval
  auto* prior_eval = app.add_subcommand("prior-eval", "Tabulate the marginal prior for tau");
  int pe_n = 50, pe_points = 50;
  std::string pe_graph = "chain", pe_adj, pe_adj_format = "edge-list";
  std::string pe_form = "trace", pe_output;
  double pe_tau_min = 1e-3, pe_tau_max = 1e3;
  prior_eval->add_option("--n", pe_n, "Graph size for chain/grid");
  prior_eval->add_option("--graph", pe_graph, "chain|grid");
  prior_eval->add_option("--adjacency", pe_adj, "Adjacency file instead of a built-in graph");
  prior_eval->add_option("--adjacency-format", pe_adj_format, "edge-list|matrix-csv");
  prior_eval->add_option("--tau-min", pe_tau_min, "Grid lower end");
  prior_eval->add_option("--tau-max", pe_tau_max, "Grid upper end");
  prior_eval->add_option("--tau-points", pe_points, "Grid size (log-spaced)");
  prior_eval->add_option("--form", pe_form, "trace|eigen");
  prior_eval->add_option("--output", pe_output, "CSV output path (default stdout)");

  // prior-check
  auto* prior_check = app.add_subcommand("prior-check", "Three-way prior equivalence sweep");
  std::uint64_t pc_seed = 1;
  int pc_instances = 50;
  double pc_fault = 0.0;
  prior_check->add_option("--seed", pc_seed, "RNG seed");
  prior_check->add_option("--instances", pc_instances, "Random instances");
  prior_check->add_option("--inject-fault", pc_fault,
                          "Perturb one trace term by this relative amount (testing hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (select->parsed())
      return cmd_select(sel_adj, sel_adj_format, sel_data, sel_response,
                        sel_regressors, sel_format, sel_output, sel_quad_tol, sel_b,
                        sel_threads, sel_cache);
    if (simulate->parsed())
      return cmd_simulate(sim_n, sim_k, sim_graph, sim_adjacency, sim_adj_format,
                          sim_tau, sim_sigma2, sim_beta, sim_seed, sim_output,
                          sim_adj_out, sim_truth_out);
    if (benchmark->parsed())
      return cmd_benchmark(ben_grid, ben_k, ben_method, ben_kff_max, ben_threads,
                           ben_seed, ben_output);
    if (prior_eval->parsed())
      return cmd_prior_eval(pe_n, pe_graph, pe_adj, pe_adj_format, pe_tau_min,
                            pe_tau_max, pe_points, pe_form, pe_output);
    if (prior_check->parsed())
      return cmd_prior_check(pc_seed, pc_instances, pc_fault);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitBadInput;
  } catch (const InvalidInputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitBadInput;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitBadInput;
}
