#include "pdrci/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pdrci;

TEST(Model, VertexEvaluationReturnsVertexMatrices) {
  const ProblemSpec p = preset("demo-double-integrator");
  for (int k = 0; k < 2; ++k) {
    const auto m = evaluate_system(p.system, SimplexPoint::vertex(2, k));
    EXPECT_EQ(m.A, p.system.A[k]);
    EXPECT_EQ(m.B, p.system.B[k]);
    EXPECT_EQ(m.E, p.system.E[k]);
  }
}

TEST(Model, DoubleIntegratorMidpoint) {
  const ProblemSpec p = preset("demo-double-integrator");
  const auto m = evaluate_system(p.system, SimplexPoint(Eigen::Vector2d(0.5, 0.5)));
  MatrixXd A(2, 2);
  A << 1, 1, 0, 1;
  EXPECT_LT((m.A - A).norm(), 1e-15);
  EXPECT_NEAR(m.B(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(m.B(0, 0), 0.0, 1e-15);
}

TEST(Model, OneDimensionalScheduling) {
  // xi = ((2 - theta) / 4, (theta + 2) / 4) gives A = theta
  const ProblemSpec p = preset("demo-1d");
  for (double theta : {-2.0, -0.5, 1.0, 2.0}) {
    const auto m = evaluate_system(p.system, SimplexPoint(Eigen::Vector2d((2 - theta) / 4, (theta + 2) / 4)));
    EXPECT_NEAR(m.A(0, 0), theta, 1e-14);
    EXPECT_NEAR(m.B(0, 0), 1.0, 1e-14);
  }
}

TEST(Model, SimplexPointValidation) {
  EXPECT_THROW(SimplexPoint(Eigen::Vector2d(0.6, 0.6)), ModelError);
  EXPECT_THROW(SimplexPoint(Eigen::Vector2d(-0.1, 1.1)), ModelError);
  EXPECT_NO_THROW(SimplexPoint(Eigen::Vector2d(0.3, 0.7)));
  EXPECT_EQ(SimplexPoint::barycenter(4).xi(), VectorXd::Constant(4, 0.25));
}

TEST(Model, EvaluateWrongLength) {
  const ProblemSpec p = preset("demo-1d");
  EXPECT_THROW(evaluate_system(p.system, SimplexPoint::barycenter(3)), ModelError);
}

TEST(Model, PresetsValidate) {
  for (const auto& name : preset_names()) {
    const ProblemSpec p = preset(name);
    EXPECT_NO_THROW(validate(p)) << name;
    EXPECT_EQ(p.name, name);
  }
  EXPECT_THROW(preset("nope"), ModelError);
}

TEST(Model, NoVerticesRejected) {
  ProblemSpec p = preset("demo-1d");
  p.system.N_xi = 0;
  try {
    validate(p);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("N_xi"), std::string::npos);
  }
}

TEST(Model, WrongMatrixShapeNamesField) {
  ProblemSpec p = preset("demo-double-integrator");
  p.system.A[1] = MatrixXd::Zero(3, 3);
  try {
    validate(p);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("A"), std::string::npos);
  }
}

TEST(Model, BoxConstraintRows) {
  MatrixXd Hx, Hu;
  box_constraints(Eigen::Vector2d(5, 5), VectorXd::Ones(1), Hx, Hu);
  ASSERT_EQ(Hx.rows(), 6);
  const Eigen::Vector2d x(5, -5);
  for (int r = 0; r < 4; ++r) EXPECT_LE((Hx.row(r) * x)(0), 1.0 + 1e-15);
  EXPECT_NEAR((Hu.row(4) * VectorXd::Ones(1))(0) + (Hu.row(5) * VectorXd::Ones(1))(0), 0.0, 1e-15);
}

TEST(Model, JsonRoundTrip) {
  for (const auto& name : preset_names()) {
    const ProblemSpec p = preset(name);
    const std::string text = serialize_problem(p);
    const ProblemSpec q = parse_problem(text);
    EXPECT_TRUE(same_problem(p, q)) << name;
    EXPECT_EQ(serialize_problem(q), text) << name;
  }
}

TEST(Model, JsonRejectsGarbage) {
  EXPECT_THROW(parse_problem("{not json"), ModelError);
  EXPECT_THROW(parse_problem("{}"), ModelError);
}

TEST(Model, VanDerPolMapOnSimplex) {
  const ProblemSpec p = preset("demo-vanderpol");
  ASSERT_TRUE(p.qlpv.enabled());
  for (double a = -1; a <= 1; a += 0.25) {
    for (double b = -1; b <= 1; b += 0.25) {
      const auto xi = p.qlpv.evaluate(Eigen::Vector2d(a, b));
      EXPECT_NEAR(xi.xi().sum(), 1.0, 1e-12);
      EXPECT_GE(xi.xi().minCoeff(), 0.0);
    }
  }
  EXPECT_THROW(p.qlpv.evaluate(Eigen::Vector2d(1.5, 0)), ModelError);
}

TEST(Model, VanDerPolNonlinearMatchesLpvAtScheduledPoint) {
  // x+ = A(xi(x)) x + B u reproduces the nonlinear update exactly
  const ProblemSpec p = preset("demo-vanderpol");
  for (const Eigen::Vector2d x : {Eigen::Vector2d(0.3, -0.4), Eigen::Vector2d(-0.9, 0.8), Eigen::Vector2d(0, 0)}) {
    const VectorXd u = VectorXd::Constant(1, 0.37);
    const auto m = evaluate_system(p.system, p.qlpv.evaluate(x));
    const VectorXd lpv = m.A * x + m.B * u;
    EXPECT_LT((lpv - p.nonlinear_step(x, u)).norm(), 1e-12);
  }
}
