#pragma once

// Polytopes: parameter-dependent sets {x : |P(xi) W^-1 x| <= 1}, their slices,
// the vertex-slice intersection, Monte-Carlo volume and planar vertex
// enumeration.

#include "pdrci/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pdrci::geometry {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

struct ParamPolytope {
  std::vector<MatrixXd> P;  // n_p x n_x per vertex
  MatrixXd W;               // n_x x n_x

  int n_p() const { return P.empty() ? 0 : static_cast<int>(P.front().rows()); }
  int n_x() const { return static_cast<int>(W.rows()); }
  int N_xi() const { return static_cast<int>(P.size()); }
  MatrixXd P_at(const SimplexPoint& xi) const;
};

/// {x : F x <= g}
struct HPolytope {
  MatrixXd F;
  VectorXd g;
  int dim() const { return static_cast<int>(F.cols()); }
  int rows() const { return static_cast<int>(F.rows()); }
};

struct Box {
  VectorXd lower;
  VectorXd upper;
  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const { return (upper - lower).prod(); }
  bool contains(const VectorXd& x, double tol = 0.0) const;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// F = [P(xi) W^-1; -P(xi) W^-1], g = 1.
HPolytope slice(const ParamPolytope& pp, const SimplexPoint& xi);
/// Stacked vertex slices; equals the intersection over the whole simplex.
HPolytope robust_intersection(const ParamPolytope& pp);

bool membership(const HPolytope& poly, const VectorXd& x, double tol = 0.0);

/// Smallest singular value of P(xi) W^-1; zero means the slice is unbounded.
double slice_rank_margin(const ParamPolytope& pp, const SimplexPoint& xi);

/// Axis-aligned bounding box from per-axis LPs. Throws GeometryError if some
/// direction exceeds `guard`.
Box bounding_box(const HPolytope& poly, double guard = 1e6);
Box bounding_box(const ConstraintData& constraints, double guard = 1e6);

/// The 2^n corners of the box followed by `extra` uniform points on its boundary.
std::vector<VectorXd> box_vertices_and_boundary_samples(const Box& box, int extra, std::uint64_t seed);

struct VolumeEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::int64_t samples = 0;
  std::int64_t hits = 0;
};

/// vol(B) * hits / N with binomial standard error. Samples are drawn in
/// fixed-size chunks with per-chunk seeds, so the result does not depend on
/// the number of worker threads.
VolumeEstimate mc_volume(const HPolytope& poly, const Box& box, std::int64_t samples, std::uint64_t seed);

struct Polygon {
  std::vector<Vector2d> vertices;  // counterclockwise
  std::vector<int> faces;          // row of F supporting edge (v_k, v_k+1)
  double area = 0.0;
};

/// Planar vertex enumeration by pairwise face intersection and shoelace area.
/// Throws GeometryError on unbounded or empty (or degenerate) input.
Polygon vertex_enumerate_2d(const HPolytope& poly, double tol = 1e-9);

/// Number of irredundant facets (edges) of an enumerated polygon.
int facet_count(const Polygon& polygon);

/// Rejection sampling from the slice's bounding box (at most 1e6 attempts),
/// falling back to random convex combinations of vertices in the plane.
std::vector<VectorXd> sample_in_slice(const ParamPolytope& pp, const SimplexPoint& xi, int count,
                                      std::uint64_t seed);

struct PolygonRecord {
  int xi_index = 0;
  int slice_id = 0;
  Polygon polygon;
};

/// CSV with header xi_index,slice_id,vertex_id,x1,x2.
void write_polygons_csv(std::ostream& os, const std::vector<PolygonRecord>& records);

}  // namespace pdrci::geometry
