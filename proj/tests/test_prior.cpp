#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "icar/dense.hpp"
#include "icar/errors.hpp"
#include "icar/prior.hpp"
#include "icar/rng.hpp"
#include "icar/simulate.hpp"
#include "icar/spectral.hpp"
#include "oracles.hpp"

using namespace icar;

namespace {

Eigen::MatrixXd random_design(Rng& rng, int n, int p) {
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  for (int c = 1; c < p; ++c)
    for (int r = 0; r < n; ++r) X(r, c) = rng.normal();
  return X;
}

struct Instance {
  NeighborhoodGraph graph;
  PrecisionStructure prec;
  SpectralBasis basis;
  Eigen::MatrixXd H_plus;
  Eigen::MatrixXd X;
  Eigen::MatrixXd X_t;
};

Instance make_instance(Rng& rng, int n, int p, double extra_prob = 0.15) {
  Instance inst;
  inst.graph = random_connected_graph(rng, n, extra_prob);
  inst.prec = build_precision(inst.graph);
  inst.basis = decompose(inst.prec);
  inst.H_plus = dense_h_plus(inst.prec.H);
  inst.X = random_design(rng, n, p);
  inst.X_t = inst.basis.P.transpose() * inst.X;
  return inst;
}

}  // namespace

TEST_CASE("trace form matches eigenvalue form pointwise over a wide tau range") {
  Rng rng(11);
  for (const int n : {10, 30, 60}) {
    for (const int p : {1, 2, 5}) {
      Instance inst = make_instance(rng, n, p);
      const TracePrior trace(inst.basis, inst.X_t);
      const EigenvaluePrior eig(projection_eigenvalues(inst.basis, inst.X), n);
      for (int g = 0; g <= 48; ++g) {
        const double tau = std::pow(10.0, -6.0 + 12.0 * g / 48.0);
        const double lt = trace.log_unnormalized(tau);
        const double le = eig.log_unnormalized(tau);
        CAPTURE(n); CAPTURE(p); CAPTURE(tau); CAPTURE(lt); CAPTURE(le);
        CHECK(std::abs(lt - le) <= 1e-8);
      }
    }
  }
}

TEST_CASE("three-way agreement including the dense W oracle") {
  Rng rng(23);
  for (const int n : {10, 30}) {
    for (const int p : {1, 3}) {
      Instance inst = make_instance(rng, n, p);
      const TracePrior trace(inst.basis, inst.X_t);
      const EigenvaluePrior eig(projection_eigenvalues(inst.basis, inst.X), n);
      for (int g = 0; g <= 16; ++g) {
        const double tau = std::pow(10.0, -4.0 + 8.0 * g / 16.0);
        const double lt = trace.log_unnormalized(tau);
        const double le = eig.log_unnormalized(tau);
        const double lw = log_prior_w_oracle(inst.H_plus, inst.X, tau);
        CAPTURE(n); CAPTURE(p); CAPTURE(tau);
        CHECK(std::abs(lt - le) <= 1e-8);
        CHECK(std::abs(lt - lw) <= 1e-8);
        CHECK(std::abs(le - lw) <= 1e-8);
      }
    }
  }
}

TEST_CASE("b weights of the chain n=3 at tau=1") {
  const SpectralBasis basis = decompose(build_precision(chain_graph(3)));
  CHECK(basis.d(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(basis.d(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(basis.d(2) == 0.0);
}

TEST_CASE("column-space invariance of all three evaluations") {
  Rng rng(31);
  Instance inst = make_instance(rng, 20, 3);
  Eigen::MatrixXd A(3, 3);
  A << 2.0, 0.3, -0.5,
       0.0, 1.5,  0.7,
       0.4, 0.0,  1.0;  // invertible recombination
  const Eigen::MatrixXd X2 = inst.X * A;
  const Eigen::MatrixXd X2_t = inst.basis.P.transpose() * X2;

  const TracePrior t1(inst.basis, inst.X_t), t2(inst.basis, X2_t);
  const EigenvaluePrior e1(projection_eigenvalues(inst.basis, inst.X), 20);
  const EigenvaluePrior e2(projection_eigenvalues(inst.basis, X2), 20);
  for (const double tau : {0.01, 1.0, 100.0}) {
    CHECK(t1.log_unnormalized(tau) == doctest::Approx(t2.log_unnormalized(tau)).epsilon(1e-9));
    CHECK(e1.log_unnormalized(tau) == doctest::Approx(e2.log_unnormalized(tau)).epsilon(1e-9));
    CHECK(log_prior_w_oracle(inst.H_plus, inst.X, tau) ==
          doctest::Approx(log_prior_w_oracle(inst.H_plus, X2, tau)).epsilon(1e-9));
  }
}

TEST_CASE("W oracle trace matches the closed form for tr(W)") {
  Rng rng(47);
  Instance inst = make_instance(rng, 15, 2);
  for (const double tau : {0.3, 1.0, 7.5}) {
    const WOracleTraces w = w_oracle_traces(inst.H_plus, inst.X, tau);
    const PriorTraceTerms terms = prior_trace_terms(inst.basis, inst.X_t, tau);
    const double closed = -(terms.tr_db - terms.tr_k) / (tau * tau);
    CHECK(w.tr_w == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("T1/T2 identities hold on random instances") {
  Rng rng(53);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 10 + static_cast<int>(rng.uniform_int(20));
    const int p = 1 + static_cast<int>(rng.uniform_int(3));
    Instance inst = make_instance(rng, n, p);
    const double tau = std::pow(10.0, -2.0 + 4.0 * rng.uniform());
    const T1T2Result r = t1_t2_identities(inst.basis, inst.X, tau);
    CAPTURE(n); CAPTURE(p); CAPTURE(tau);
    CAPTURE(r.t1_direct); CAPTURE(r.t1_closed);
    CAPTURE(r.t2_direct); CAPTURE(r.t2_closed);
    CHECK(r.pass);
  }
}

TEST_CASE("T1/T2 at extreme tau and in the single-lambda case") {
  Rng rng(59);
  Instance inst = make_instance(rng, 10, 2);
  const T1T2Result big = t1_t2_identities(inst.basis, inst.X, 1e8);
  CHECK(big.pass);
  CHECK(big.t1_direct > 0.0);
  CHECK(big.t1_direct < 1e-4);
  CHECK(big.t2_direct > 0.0);
  CHECK(big.t2_direct < 1e-8);

  // p = n-1 leaves a single projection eigenvalue.
  Instance tight = make_instance(rng, 8, 7);
  const T1T2Result single = t1_t2_identities(tight.basis, tight.X, 0.7);
  CHECK(single.pass);
}

TEST_CASE("psi reparameterization is a plain change of variables") {
  Rng rng(61);
  Instance inst = make_instance(rng, 12, 2);
  const TracePrior prior(inst.basis, inst.X_t);
  for (const double psi : {-5.0, 0.0, 5.0}) {
    const double via_psi = log_prior_psi(prior, psi);
    const double direct = prior.log_unnormalized(std::exp(psi));
    CHECK(via_psi - psi == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("prior is proper and the two forms agree on the mass") {
  const SpectralBasis basis = decompose(build_precision(chain_graph(20)));
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(20, 1);
  const Eigen::MatrixXd X_t = basis.P.transpose() * X;

  const TracePrior trace(basis, X_t);
  const EigenvaluePrior eig(projection_eigenvalues(basis, X), 20);

  const PropernessResult mt = check_properness(trace);
  const PropernessResult me = check_properness(eig);
  CHECK(mt.converged);
  CHECK(me.converged);
  CHECK(std::isfinite(mt.log_mass));
  CHECK(std::abs(mt.log_mass - me.log_mass) <= 1e-6);
}

TEST_CASE("properness holds across random models") {
  Rng rng(67);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 10 + static_cast<int>(rng.uniform_int(41));
    const int p = 1 + static_cast<int>(rng.uniform_int(4));
    Instance inst = make_instance(rng, n, p);
    const TracePrior prior(inst.basis, inst.X_t);
    const PropernessResult r = check_properness(prior);
    CAPTURE(n); CAPTURE(p);
    CHECK(r.converged);
    CHECK(std::isfinite(r.log_mass));
  }
}

TEST_CASE("eigenvalue-form prior decays monotonically past 10 lambda_max") {
  Rng rng(71);
  Instance inst = make_instance(rng, 25, 3);
  const Eigen::VectorXd lam = projection_eigenvalues(inst.basis, inst.X);
  const EigenvaluePrior prior(lam, 25);
  double tau = 10.0 * lam(0);
  double prev = prior.log_unnormalized(tau);
  for (int step = 0; step < 20; ++step) {
    tau *= 1.7;
    const double next = prior.log_unnormalized(tau);
    CHECK(next < prev);
    prev = next;
  }
}

TEST_CASE("psi reparameterization preserves the prior mass") {
  // Two independent numeric integrals: expanding-interval quadrature in psi
  // versus decade-by-decade composite integration in raw tau.
  const SpectralBasis basis = decompose(build_precision(chain_graph(15)));
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(15, 1);
  const TracePrior prior(basis, basis.P.transpose() * X);

  const PropernessResult psi_mass = check_properness(prior);
  REQUIRE(psi_mass.converged);

  double tau_mass = 0.0;
  for (int decade = -8; decade < 8; ++decade) {
    const double lo = std::pow(10.0, decade);
    const double hi = std::pow(10.0, decade + 1);
    const auto log_pi = [&](double tau) { return prior.log_unnormalized(tau); };
    tau_mass += std::exp(oracle::log_integral_doubling(log_pi, lo, hi, 1e-9, 64));
  }
  CHECK(std::abs(std::log(tau_mass) - psi_mass.log_mass) <= 1e-6);
}

TEST_CASE("degenerate brackets vanish instead of failing") {
  // All projection eigenvalues equal: the bracket is exactly zero.
  Eigen::VectorXd lam = Eigen::VectorXd::Constant(5, 2.0);
  const EigenvaluePrior eig(lam, 10);
  CHECK(eig.log_unnormalized(1.0) == -std::numeric_limits<double>::infinity());

  // A single eigenvalue behaves the same way.
  Eigen::VectorXd one(1);
  one << 3.0;
  const EigenvaluePrior single(one, 2);
  CHECK(single.log_unnormalized(0.5) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("equivalence sweep passes clean and detects injected faults") {
  EquivalenceSweepConfig cfg;
  cfg.seed = 7;
  cfg.instances = 6;
  cfg.sizes = {10, 20};
  cfg.tau_points = 9;
  const EquivalenceSweepResult clean = run_equivalence_sweep(cfg);
  CHECK(clean.max_rel_discrepancy <= 1e-8);

  cfg.fault_eps = 1e-3;
  const EquivalenceSweepResult faulty = run_equivalence_sweep(cfg);
  CHECK(faulty.max_rel_discrepancy > 1e-8);
}
