#include "pdrci/geometry.hpp"
#include "reference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <random>
#include <sstream>

using namespace pdrci;
using namespace pdrci::geometry;

namespace {

ParamPolytope unit_box_pp(int N = 2) {
  ParamPolytope pp;
  pp.P.assign(static_cast<std::size_t>(N), MatrixXd::Identity(2, 2));
  pp.W = MatrixXd::Identity(2, 2);
  return pp;
}

HPolytope square(double half) {
  HPolytope h;
  h.F.resize(4, 2);
  h.F << 1, 0, -1, 0, 0, 1, 0, -1;
  h.g = VectorXd::Constant(4, half);
  return h;
}

}  // namespace

TEST(Geometry, UnitBoxSlice) {
  const auto h = slice(unit_box_pp(), SimplexPoint::barycenter(2));
  EXPECT_EQ(h.rows(), 4);
  const auto poly = vertex_enumerate_2d(h);
  EXPECT_EQ(poly.vertices.size(), 4u);
  EXPECT_NEAR(poly.area, 4.0, 1e-12);
  EXPECT_EQ(facet_count(poly), 4);
}

TEST(Geometry, SliceIsAffineInXi) {
  const auto c = testdata::reference_double_integrator();
  const auto a = slice(c.set, SimplexPoint::vertex(2, 0));
  const auto b = slice(c.set, SimplexPoint::vertex(2, 1));
  const double lam = 0.3;
  const auto m = slice(c.set, SimplexPoint(Eigen::Vector2d(lam, 1 - lam)));
  EXPECT_LT((m.F - (lam * a.F + (1 - lam) * b.F)).norm(), 1e-12);
}

TEST(Geometry, RobustIntersectionRows) {
  const auto c = testdata::reference_double_integrator();
  EXPECT_EQ(robust_intersection(c.set).rows(), 2 * 4 * 2);
  // equal vertex matrices: the intersection is the single slice
  const auto same = robust_intersection(unit_box_pp());
  EXPECT_NEAR(vertex_enumerate_2d(same).area, 4.0, 1e-12);
}

TEST(Geometry, ReferenceIntersectionAreaAndComplexity) {
  const auto c = testdata::reference_double_integrator();
  const auto poly = vertex_enumerate_2d(robust_intersection(c.set));
  EXPECT_NEAR(poly.area, 21.7907, 0.05);
  EXPECT_EQ(facet_count(poly), 8);
}

TEST(Geometry, Membership) {
  const auto h = slice(unit_box_pp(), SimplexPoint::barycenter(2));
  EXPECT_TRUE(membership(h, Eigen::Vector2d(0, 0)));
  EXPECT_TRUE(membership(h, Eigen::Vector2d(1, 0), 0.0));
  EXPECT_FALSE(membership(h, Eigen::Vector2d(1.1, 0)));
}

TEST(Geometry, BoundingBoxFromConstraints) {
  const ProblemSpec p = preset("demo-double-integrator");
  const Box b = bounding_box(p.constraints);
  EXPECT_LT((b.lower - Eigen::Vector2d(-5, -5)).norm(), 1e-7);
  EXPECT_LT((b.upper - Eigen::Vector2d(5, 5)).norm(), 1e-7);
  const Box b1 = bounding_box(preset("demo-1d").constraints);
  EXPECT_NEAR(b1.lower[0], -2.0, 1e-7);
  EXPECT_NEAR(b1.upper[0], 2.0, 1e-7);
}

TEST(Geometry, BoundingBoxRotated) {
  // diamond |x1| + |x2| <= 1 has the tight box [-1, 1]^2
  HPolytope h;
  h.F.resize(4, 2);
  h.F << 1, 1, 1, -1, -1, 1, -1, -1;
  h.g = VectorXd::Ones(4);
  const Box b = bounding_box(h);
  EXPECT_LT((b.upper - Eigen::Vector2d(1, 1)).norm(), 1e-7);
  EXPECT_LT((b.lower + Eigen::Vector2d(1, 1)).norm(), 1e-7);
}

TEST(Geometry, BoundingBoxUnboundedThrows) {
  HPolytope h;
  h.F.resize(1, 2);
  h.F << 1, 0;
  h.g = VectorXd::Ones(1);
  EXPECT_THROW(bounding_box(h), GeometryError);
}

TEST(Geometry, BoxVerticesAndBoundary) {
  Box b{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)};
  EXPECT_EQ(box_vertices_and_boundary_samples(b, 0, 1).size(), 4u);
  const auto pts = box_vertices_and_boundary_samples(b, 8, 1);
  ASSERT_EQ(pts.size(), 12u);
  for (const auto& x : pts) {
    EXPECT_TRUE(b.contains(x, 1e-12));
    EXPECT_NEAR(x.cwiseAbs().maxCoeff(), 1.0, 1e-12);
  }
  Box b1{VectorXd::Constant(1, -2), VectorXd::Constant(1, 2)};
  EXPECT_EQ(box_vertices_and_boundary_samples(b1, 0, 1).size(), 2u);
}

TEST(Geometry, MonteCarloSquare) {
  Box b{Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2)};
  const auto v = mc_volume(square(1.0), b, 200000, 3);
  EXPECT_LE(std::abs(v.value - 4.0), 4 * v.standard_error);
}

TEST(Geometry, MonteCarloTriangle) {
  HPolytope t;
  t.F.resize(3, 2);
  t.F << -1, 0, 0, -1, 1, 1;
  t.g = Eigen::Vector3d(0, 0, 1);
  Box b{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  const auto v = mc_volume(t, b, 200000, 4);
  EXPECT_LE(std::abs(v.value - 0.5), 4 * v.standard_error);
}

TEST(Geometry, MonteCarloReferenceSet) {
  const auto c = testdata::reference_double_integrator();
  const auto h = robust_intersection(c.set);
  const double exact = vertex_enumerate_2d(h).area;
  const auto v = mc_volume(h, bounding_box(h), 200000, 5);
  EXPECT_LE(std::abs(v.value - exact), 4 * v.standard_error);
}

TEST(Geometry, MonteCarloDeterministic) {
  Box b{Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2)};
  EXPECT_EQ(mc_volume(square(1.0), b, 50000, 9).hits, mc_volume(square(1.0), b, 50000, 9).hits);
}

TEST(Geometry, EmptyPolygonThrows) {
  HPolytope h;
  h.F.resize(2, 2);
  h.F << 1, 0, -1, 0;
  h.g = Eigen::Vector2d(-1, -1);  // x <= -1 and x >= 1
  EXPECT_THROW(vertex_enumerate_2d(h), GeometryError);
}

TEST(Geometry, RankMargin) {
  EXPECT_NEAR(slice_rank_margin(unit_box_pp(), SimplexPoint::barycenter(2)), 1.0, 1e-12);
  ParamPolytope flat = unit_box_pp();
  flat.P[0].row(1).setZero();
  flat.P[1].row(1).setZero();
  EXPECT_NEAR(slice_rank_margin(flat, SimplexPoint::barycenter(2)), 0.0, 1e-12);
}

TEST(Geometry, SliceSampling) {
  const auto pp = unit_box_pp();
  const auto h = slice(pp, SimplexPoint::barycenter(2));
  const auto pts = sample_in_slice(pp, SimplexPoint::barycenter(2), 200, 8);
  ASSERT_EQ(pts.size(), 200u);
  for (const auto& x : pts) EXPECT_TRUE(membership(h, x, 1e-12));
  EXPECT_TRUE(sample_in_slice(pp, SimplexPoint::barycenter(2), 0, 8).empty());
  const auto again = sample_in_slice(pp, SimplexPoint::barycenter(2), 200, 8);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i], again[i]);
}

TEST(Geometry, PolygonCsvFormat) {
  std::ostringstream os;
  write_polygons_csv(os, {{0, 0, vertex_enumerate_2d(square(1.0))}});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "xi_index,slice_id,vertex_id,x1,x2");
  int rows = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}
