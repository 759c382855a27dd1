#pragma once

// Two-stage synthesis: a parameter-independent set grown by determinant
// increase, then parameter-dependent P(xi) shaped by a sampled volume cost.

#include "pdrci/conic.hpp"
#include "pdrci/geometry.hpp"
#include "pdrci/lmi.hpp"
#include "pdrci/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdrci::synthesis {

struct SynthesisOptions {
  int n_p = 4;
  int d = 1;
  int iters_stage1 = 10;  // includes the initial solve
  int iters_stage2 = 60;
  double epsilon = 1e-7;
  int grid_resolution = 4;
  int extra_boundary_samples = 0;
  std::optional<double> gamma;  // overrides problem.performance when set
  std::uint64_t seed = 0;
  double convergence_tol = 0.0;  // 0 disables the early stop
  std::int64_t mc_samples = 20000;
  conic::Tolerances solver;
};

/// Options with problem-file overrides applied, then validated.
SynthesisOptions resolve_options(const ProblemSpec& problem, SynthesisOptions base);
void validate(const SynthesisOptions& opts, int n_x);

struct IterationRecord {
  int iter = 0;   // 1-based over both stages
  int stage = 1;
  double detW = 0.0;
  double sigma_sum = 0.0;  // stage two only, NaN otherwise
  double mc_volume = 0.0;
  double exact_area = 0.0;  // n_x <= 2, NaN otherwise
  std::string solver_status;
  double epsilon = 0.0;
  int solver_iterations = 0;
  double wall_s = 0.0;
};

/// Solver call log entry: every call, including retries.
struct SolverCall {
  int stage = 1;
  int iter = 0;
  std::string status;
  double epsilon = 0.0;
};

struct SynthesisState {
  std::vector<MatrixXd> P;       // [k]
  MatrixXd W;
  std::vector<MatrixXd> Kbar;    // [k]
  std::vector<MatrixXd> X;       // [i]
  std::vector<VectorXd> Lambda;  // [i]
  std::vector<VectorXd> Gamma;   // [i]
  std::vector<double> phi;       // [i]
  std::vector<VectorXd> Pi;      // [j]
  VectorXd Upsilon;
  std::vector<MatrixXd> Q;       // [k]
  std::vector<std::vector<MatrixXd>> V;  // [i][k]
  std::vector<MatrixXd> S, F;    // [k]
  int iter_stage1 = 0;
  int iter_stage2 = 0;
  double last_sigma = 0.0;
  std::vector<IterationRecord> trace;
  std::vector<SolverCall> calls;
  std::vector<std::string> warnings;

  std::vector<MatrixXd> gains() const;  // K^k = Kbar^k W^-1
  geometry::ParamPolytope polytope() const;
};

struct SynthesisResult {
  geometry::ParamPolytope set;
  std::vector<MatrixXd> K;
  bool performance_certified = false;
  double gamma = 0.0;
  geometry::ParamPolytope stage1_set;
  std::vector<IterationRecord> trace;
  std::vector<SolverCall> calls;
  std::vector<std::string> warnings;
  SynthesisOptions options;
  double min_rank_margin = 0.0;
};

class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(const std::string& what, std::string status)
      : std::runtime_error(what), status_(std::move(status)) {}
  const std::string& status() const { return status_; }

 private:
  std::string status_;
};

/// Unit-norm hyperplane normals: equally spaced half-circle angles for n_x = 2,
/// a Fibonacci hemisphere for n_x >= 3, and +-1 for n_x = 1.
MatrixXd select_initial_P(int n_p, int n_x);

/// Lattice {beta / resolution}, vertices first among equals of enumeration order.
std::vector<SimplexPoint> make_simplex_grid(int N_xi, int resolution);

/// Problem with the performance override applied; E is zeroed when performance is on.
ProblemSpec effective_problem(const ProblemSpec& problem, const SynthesisOptions& opts);

SynthesisState solve_stage1_initial(const ProblemSpec& problem, const MatrixXd& P_init,
                                    const SynthesisOptions& opts);
/// Runs the remaining stage-one passes (opts.iters_stage1 - 1).
SynthesisState iterate_stage1(const ProblemSpec& problem, SynthesisState state, const SynthesisOptions& opts);
/// One determinant-increase pass; returns false (state untouched) on failure.
bool stage1_step(const ProblemSpec& problem, SynthesisState& state, const SynthesisOptions& opts);

struct VolumeCost {
  conic::VarHandle sigma;  // N_m x N_n nonnegative
  int rows = 0;            // linear inequality rows added
};

/// sigma[m][n] >= +-P(xi^m) W^-1 x_n - 1 and objective sum(sigma).
VolumeCost build_volume_cost(conic::ConicProgram& program, const std::vector<conic::VarHandle>& P,
                             const MatrixXd& W, const std::vector<SimplexPoint>& grid,
                             const std::vector<VectorXd>& samples);

std::vector<VectorXd> volume_samples(const ProblemSpec& problem, const SynthesisOptions& opts);

struct SeededProgram {
  conic::ConicProgram program;
  VectorXd y;  // the state itself, written in stage-two variables
};

/// The stage-two program around `state` with margin eps, plus the point
/// P = P0, psi = 1/phi, tildes = inverses, GammaBar = Gamma/phi^2 and the
/// remaining variables copied. Every condition holds there when `state` is
/// a feasible iterate.
SeededProgram stage2_seeded(const ProblemSpec& problem, const SynthesisState& state, const SynthesisOptions& opts,
                            double eps);

/// One stage-two pass; returns false (state untouched) on failure.
bool stage2_step(const ProblemSpec& problem, SynthesisState& state, const SynthesisOptions& opts);

SynthesisResult run_algorithm1(const ProblemSpec& problem, SynthesisState state, const SynthesisOptions& opts);

/// select_initial_P, both stages, result.
SynthesisResult synthesize(const ProblemSpec& problem, const SynthesisOptions& opts);

/// Area (n_x = 2), length (n_x = 1) of the vertex-slice intersection, NaN otherwise.
double exact_measure(const geometry::ParamPolytope& set);

}  // namespace pdrci::synthesis
