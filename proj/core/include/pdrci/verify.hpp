#pragma once

// Sampling-based evidence for a synthesized set and controller: invariance,
// constraint satisfaction, performance, closed-loop simulation, and numeric
// property checks of the supporting bounds.

#include "pdrci/geometry.hpp"
#include "pdrci/model.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace pdrci::verify {

/// A set with its vertex gains K^k.
struct Certificate {
  geometry::ParamPolytope set;
  std::vector<MatrixXd> K;
};

struct CheckReport {
  std::string name;
  std::int64_t trials = 0;
  std::int64_t violations = 0;
  double worst_margin = 0.0;  // largest (value - bound) seen; <= tol when passing
  double max_value = 0.0;     // check-specific maximum (e.g. accumulated cost)
  std::uint64_t seed = 0;
  bool passed() const { return violations == 0; }
};

struct VerificationReport {
  std::vector<CheckReport> checks;
  bool passed() const;
  std::int64_t trials() const;
  std::int64_t violations() const;
};

enum class XiMode { Uniform, Vertex, Mixed };

struct SamplingOptions {
  double tol = 1e-6;
  XiMode mode = XiMode::Mixed;
};

/// Uniform point on the unit simplex (flat Dirichlet).
SimplexPoint random_simplex_point(int n, std::mt19937_64& rng);

/// Point of {|P W^-1 x| <= 1} by ray scaling, a quarter of them on the boundary.
VectorXd sample_in_set(const MatrixXd& PWinv, std::mt19937_64& rng);

/// x+ = A_K(xi) x + E(xi) w must lie in S(xi+) for the sampled xi+ and every
/// vertex xi+ (the worst case over the simplex). -x is checked as well.
CheckReport check_invariance(const Certificate& c, const ProblemSpec& problem, std::int64_t trials,
                             std::uint64_t seed, const SamplingOptions& opts = {});

/// (H_x + H_u K(xi)) x <= 1 on slice vertices of a grid (n_x = 2), on slice
/// endpoints (n_x = 1), plus `trials` random boundary points.
CheckReport check_system_constraints(const Certificate& c, const ProblemSpec& problem, int grid_resolution,
                                     std::int64_t trials, std::uint64_t seed, const SamplingOptions& opts = {});

/// sum ||z||^2 over `horizon` steps with w = 0 and i.i.d. xi(t) must stay
/// <= gamma + tol and ||x(T)|| must fall below 1e-3.
CheckReport check_performance(const Certificate& c, const ProblemSpec& problem, double gamma, std::int64_t runs,
                              int horizon, std::uint64_t seed, const SamplingOptions& opts = {});

/// The intersection of vertex slices lies inside every slice.
CheckReport check_containment(const Certificate& c, std::int64_t trials, std::uint64_t seed);

struct Trajectory {
  std::vector<VectorXd> x, u, w, z;
  std::vector<SimplexPoint> xi;
  bool left_validity = false;  // qLPV map left its validity box
  int steps() const { return static_cast<int>(u.size()); }
};

/// Either an explicit scheduling sequence or the problem's qLPV map.
using Schedule = std::variant<std::vector<SimplexPoint>, QlpvMap>;

/// u = K(xi) x. With a qLPV map and known nonlinear dynamics the exact
/// nonlinear update is used; otherwise the LPV recursion. Missing w entries
/// are zero.
Trajectory simulate_closed_loop(const ProblemSpec& problem, const std::vector<MatrixXd>& K, const VectorXd& x0,
                                const Schedule& schedule, const std::vector<VectorXd>& w, int T);

struct PropertyResult {
  bool passed = false;
  int instances = 0;
  double worst = 0.0;
};

/// min eig(L^T M^-1 L - (L^T Y + Y^T L - Y^T M Y)) >= -1e-9 on random data.
PropertyResult check_linearization_bound(int samples, std::uint64_t seed);

/// Polya families against a brute-force expansion of (sum xi)^d * sum xi_k xi_l B(k,l)
/// with integer-valued random blocks (exact in floating point).
PropertyResult check_assembly_oracle(int d_max, int N_xi_max, std::uint64_t seed);

/// qLPV only: from every vertex of the vertex-slice intersection, `steps` steps
/// of the scheduled closed loop (nonlinear update when known) must stay in that
/// intersection, inside the validity box, and satisfy H_x x + H_u u <= 1.
CheckReport check_qlpv_vertices(const Certificate& c, const ProblemSpec& problem, int steps = 300,
                                double tol = 1e-6);

/// Vertices of the intersection of vertex slices (n_x = 2 only).
std::vector<VectorXd> robust_set_vertices(const geometry::ParamPolytope& set);

VerificationReport verify_all(const Certificate& c, const ProblemSpec& problem, double gamma, bool performance,
                              std::int64_t trials, std::uint64_t seed);

}  // namespace pdrci::verify
