#include "pdrci/verify.hpp"
#include "reference.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pdrci;
using namespace pdrci::verify;

TEST(Invariance, ReferenceCertificatePasses) {
  const auto c = testdata::reference_double_integrator();
  const auto r = check_invariance(c, preset("demo-double-integrator"), 100000, 1);
  EXPECT_EQ(r.trials, 100000);
  EXPECT_EQ(r.violations, 0) << "worst margin " << r.worst_margin;
}

TEST(Invariance, ExtremeDisturbancesPass) {
  const auto c = testdata::reference_double_integrator();
  SamplingOptions o;
  o.mode = XiMode::Vertex;
  EXPECT_EQ(check_invariance(c, preset("demo-double-integrator"), 20000, 2, o).violations, 0);
}

TEST(Invariance, ZeroGainFails) {
  auto c = testdata::reference_double_integrator();
  for (auto& K : c.K) K.setZero();
  EXPECT_GT(check_invariance(c, preset("demo-double-integrator"), 10000, 3).violations, 0);
}

TEST(Constraints, ReferencePassesScaledFails) {
  const ProblemSpec p = preset("demo-double-integrator");
  auto c = testdata::reference_double_integrator();
  EXPECT_EQ(check_system_constraints(c, p, 4, 2000, 4).violations, 0);
  c.set.W *= 1.5;
  EXPECT_GT(check_system_constraints(c, p, 4, 2000, 4).violations, 0);
}

TEST(Constraints, VacuousRowsNeverFail) {
  ProblemSpec p = preset("demo-double-integrator");
  p.constraints.H_x.setZero();
  p.constraints.H_u.setZero();
  auto c = testdata::reference_double_integrator();
  c.set.W *= 3.0;
  EXPECT_EQ(check_system_constraints(c, p, 4, 2000, 5).violations, 0);
}

TEST(Containment, ReferenceAndRandom) {
  EXPECT_EQ(check_containment(testdata::reference_double_integrator(), 10000, 6).violations, 0);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 5; ++t) {
    Certificate c;
    for (int k = 0; k < 3; ++k) c.set.P.push_back(MatrixXd::Random(5, 2));
    c.set.W = MatrixXd::Identity(2, 2) + 0.2 * MatrixXd::Random(2, 2);
    const auto r = check_containment(c, 10000, rng());
    EXPECT_EQ(r.violations, 0);
  }
}

TEST(Linearization, RandomInstances) {
  const auto r = check_linearization_bound(200, 8);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.instances, 200);
  EXPECT_GE(r.worst, -1e-9);
}

TEST(Linearization, TightAndZeroCases) {
  // independent of check_linearization_bound: direct evaluation
  const MatrixXd L = MatrixXd::Random(4, 4);
  MatrixXd M = MatrixXd::Random(4, 4);
  M = (M * M.transpose() + MatrixXd::Identity(4, 4)).eval();
  const MatrixXd exact = L.transpose() * M.inverse() * L;
  auto bound = [&](const MatrixXd& Y) { return L.transpose() * Y + Y.transpose() * L - Y.transpose() * M * Y; };
  EXPECT_LT((exact - bound(M.inverse() * L)).norm(), 1e-9);
  EXPECT_EQ(bound(MatrixXd::Zero(4, 4)).norm(), 0.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(exact);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(AssemblyOracle, SmallAndFull) {
  EXPECT_TRUE(check_assembly_oracle(0, 1, 9).passed);
  EXPECT_TRUE(check_assembly_oracle(1, 2, 9).passed);
  EXPECT_TRUE(check_assembly_oracle(3, 3, 9).passed);
}

TEST(Simulation, ZeroStateStaysZero) {
  const ProblemSpec p = preset("demo-double-integrator");
  const auto c = testdata::reference_double_integrator();
  std::vector<SimplexPoint> xi(50, SimplexPoint::barycenter(2));
  const auto tr = simulate_closed_loop(p, c.K, VectorXd::Zero(2), xi, {}, 50);
  EXPECT_EQ(tr.steps(), 50);
  for (const auto& x : tr.x) EXPECT_EQ(x.norm(), 0.0);
}

TEST(Simulation, OneDimensionalContraction) {
  // K1 = 1, K2 = -1 gives x+ = theta x / 2
  const ProblemSpec p = preset("demo-1d");
  const std::vector<MatrixXd> K = {MatrixXd::Ones(1, 1), -MatrixXd::Ones(1, 1)};
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> th(-2.0, 2.0);
  std::vector<SimplexPoint> xi;
  std::vector<double> thetas;
  for (int t = 0; t < 40; ++t) {
    const double theta = th(rng);
    thetas.push_back(theta);
    xi.emplace_back(Eigen::Vector2d((2 - theta) / 4, (theta + 2) / 4));
  }
  const auto tr = simulate_closed_loop(p, K, VectorXd::Constant(1, 1.0), xi, {}, 40);
  for (int t = 0; t < 40; ++t) {
    EXPECT_NEAR(tr.x[static_cast<std::size_t>(t + 1)][0], thetas[static_cast<std::size_t>(t)] / 2 * tr.x[static_cast<std::size_t>(t)][0], 1e-12);
    EXPECT_LE(std::abs(tr.x[static_cast<std::size_t>(t + 1)][0]), std::abs(tr.x[static_cast<std::size_t>(t)][0]) + 1e-15);
  }
}

TEST(Performance, CostGrowsWithHorizon) {
  const ProblemSpec p = preset("demo-double-integrator");
  const auto c = testdata::reference_double_integrator();
  std::mt19937_64 rng(11);
  std::vector<SimplexPoint> xi;
  for (int t = 0; t < 40; ++t) xi.push_back(random_simplex_point(2, rng));
  auto cost = [&](int T) {
    const auto tr = simulate_closed_loop(p, c.K, Eigen::Vector2d(1.0, -0.5), xi, {}, T);
    double J = 0.0;
    for (const auto& z : tr.z) J += z.squaredNorm();
    return J;
  };
  EXPECT_GE(cost(40), cost(20));
  EXPECT_GT(cost(20), 0.0);
}

TEST(Performance, ZeroGammaFails) {
  ProblemSpec p = preset("demo-double-integrator");
  p.performance = {true, 0.0};
  const auto c = testdata::reference_double_integrator();
  EXPECT_GT(check_performance(c, p, 0.0, 20, 50, 12).violations, 0);
}

TEST(Simplex, RandomPointsOnSimplex) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_simplex_point(3, rng);
    EXPECT_NEAR(p.xi().sum(), 1.0, 1e-12);
    EXPECT_GE(p.xi().minCoeff(), 0.0);
  }
}

TEST(Sampling, PointsInsideSet) {
  const auto c = testdata::reference_double_integrator();
  const MatrixXd PW = c.set.P[0] * c.set.W.inverse();
  std::mt19937_64 rng(14);
  for (int t = 0; t < 1000; ++t) {
    const VectorXd x = sample_in_set(PW, rng);
    EXPECT_LE((PW * x).cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
}
