#include "pdrci/synthesis.hpp"

#include "pdrci/polya.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace pdrci::synthesis {

using conic::AffineExpr;
using conic::ConicProgram;
using conic::SolveStatus;
using lmi::Stage;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

VectorXd diag_of(const MatrixXd& m) { return m.diagonal(); }

MatrixXd inverse_times(const MatrixXd& X, const MatrixXd& W) { return X.ldlt().solve(W); }

void record(SynthesisState& s, int stage, double sigma, const conic::Solution& sol, double eps,
            double wall, const SynthesisOptions& opts) {
  IterationRecord r;
  r.iter = static_cast<int>(s.trace.size()) + 1;
  r.stage = stage;
  r.detW = std::abs(s.W.determinant());
  r.sigma_sum = sigma;
  const auto set = s.polytope();
  const auto poly = geometry::robust_intersection(set);
  try {
    const auto box = geometry::bounding_box(poly);
    r.mc_volume = geometry::mc_volume(poly, box, opts.mc_samples, opts.seed).value;
  } catch (const geometry::GeometryError&) {
    r.mc_volume = kNaN;
  }
  r.exact_area = exact_measure(set);
  r.solver_status = conic::to_string(sol.status);
  r.epsilon = eps;
  r.solver_iterations = sol.stats.iterations;
  r.wall_s = wall;
  s.trace.push_back(r);
}

struct Attempt {
  conic::Solution sol;
  double eps = 0.0;
};

/// Builds and solves with eps, then once more with 10 eps if the first call
/// did not return a usable point.
template <class Build>
Attempt solve_with_retry(SynthesisState& s, int stage, const SynthesisOptions& opts, Build&& build,
                         ConicProgram& out_program) {
  Attempt a;
  for (int attempt = 0; attempt < 2; ++attempt) {
    a.eps = opts.epsilon * (attempt == 0 ? 1.0 : 10.0);
    ConicProgram prog;
    build(prog, a.eps);
    a.sol = conic::solve(prog, opts.solver);
    s.calls.push_back({stage, static_cast<int>(s.trace.size()) + 1, conic::to_string(a.sol.status), a.eps});
    if (a.sol.ok()) {
      out_program = std::move(prog);
      return a;
    }
    if (a.sol.status == SolveStatus::Infeasible && stage == 1 && s.trace.empty()) return a;
  }
  return a;
}

void extract_common(SynthesisState& s, const ConicProgram& prog, const lmi::DecisionLayout& L,
                    const VectorXd& y) {
  s.Kbar.clear();
  for (auto h : L.Kbar) s.Kbar.push_back(prog.value(h, y));
  s.X.clear();
  for (auto h : L.X) s.X.push_back(prog.value(h, y));
  s.Q.clear();
  for (auto h : L.Q) s.Q.push_back(prog.value(h, y));
  s.S.clear();
  for (auto h : L.S) s.S.push_back(prog.value(h, y));
  s.F.clear();
  for (auto h : L.F) s.F.push_back(prog.value(h, y));
  s.V.clear();
  for (const auto& row : L.V) {
    s.V.emplace_back();
    for (auto h : row) s.V.back().push_back(prog.value(h, y));
  }
}

}  // namespace

std::vector<MatrixXd> SynthesisState::gains() const {
  std::vector<MatrixXd> K;
  // K = Kbar W^-1, i.e. K^T = W^-T Kbar^T
  const auto lu = W.transpose().partialPivLu();
  for (const auto& Kb : Kbar) K.push_back(lu.solve(Kb.transpose()).transpose());
  return K;
}

geometry::ParamPolytope SynthesisState::polytope() const { return {P, W}; }

SynthesisOptions resolve_options(const ProblemSpec& problem, SynthesisOptions base) {
  const auto& o = problem.options;
  if (o.n_p) base.n_p = *o.n_p;
  if (o.d) base.d = *o.d;
  if (o.iters1) base.iters_stage1 = *o.iters1;
  if (o.iters2) base.iters_stage2 = *o.iters2;
  if (o.grid) base.grid_resolution = *o.grid;
  if (o.epsilon) base.epsilon = *o.epsilon;
  return base;
}

void validate(const SynthesisOptions& o, int n_x) {
  auto fail = [](const std::string& m) { throw ModelError("options." + m); };
  if (o.n_p < n_x) fail("n_p: must be >= n_x (" + std::to_string(n_x) + ")");
  if (o.d < 0 || o.d + 2 > polya::kMaxDegree) fail("d: out of range");
  if (o.iters_stage1 < 1) fail("iters1: must be >= 1");
  if (o.iters_stage2 < 0) fail("iters2: must be >= 0");
  if (o.grid_resolution < 1) fail("grid: must be >= 1");
  if (!(o.epsilon > 0.0)) fail("epsilon: must be positive");
  if (o.extra_boundary_samples < 0) fail("samples: must be >= 0");
  if (o.mc_samples < 1) fail("mc_samples: must be positive");
  if (o.gamma && !(*o.gamma >= 0.0)) fail("gamma: must be >= 0");
}

MatrixXd select_initial_P(int n_p, int n_x) {
  MatrixXd P(n_p, n_x);
  if (n_x == 1) {
    P.setOnes();
    return P;
  }
  if (n_x == 2) {
    for (int i = 0; i < n_p; ++i) {
      const double a = std::numbers::pi * i / n_p;
      P(i, 0) = std::cos(a);
      P(i, 1) = std::sin(a);
    }
    return P;
  }
  // Fibonacci lattice on the upper hemisphere, lifted to n_x by cycling the
  // golden angle through successive coordinate planes.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n_p; ++i) {
    VectorXd v = VectorXd::Zero(n_x);
    const double z = 1.0 - (i + 0.5) / n_p;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden * i;
    v[0] = r * std::cos(a);
    v[1] = r * std::sin(a);
    v[2] = z;
    for (int k = 3; k < n_x; ++k) {
      const double b = golden * (i + 1) * (k - 1);
      const double c = std::cos(b), s = std::sin(b);
      const double t = v[k - 1];
      v[k - 1] = c * t;
      v[k] = s * t;
    }
    P.row(i) = v.normalized().transpose();
  }
  // the leading n_x rows must span; fall back to identity rows otherwise
  Eigen::JacobiSVD<MatrixXd> svd(P);
  if (svd.singularValues()(n_x - 1) < 1e-6) P.topRows(n_x).setIdentity();
  return P;
}

std::vector<SimplexPoint> make_simplex_grid(int N_xi, int resolution) {
  std::vector<SimplexPoint> grid;
  for (const auto& beta : polya::enumerate_exponents(resolution, N_xi)) {
    VectorXd xi(N_xi);
    for (int k = 0; k < N_xi; ++k) xi[k] = static_cast<double>(beta[k]) / resolution;
    grid.emplace_back(xi);
  }
  return grid;
}

ProblemSpec effective_problem(const ProblemSpec& problem, const SynthesisOptions& opts) {
  ProblemSpec p = problem;
  if (opts.gamma) {
    if (p.system.n_z == 0) throw ModelError("performance.gamma: system has no performance output (C, D)");
    p.performance.enabled = true;
    p.performance.gamma = *opts.gamma;
  }
  // performance is only meaningful with w = 0
  if (p.performance.enabled) {
    for (MatrixXd& E : p.system.E) E.setZero();
  }
  return p;
}

double exact_measure(const geometry::ParamPolytope& set) {
  const auto poly = geometry::robust_intersection(set);
  if (set.n_x() == 1) {
    double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
    for (int r = 0; r < poly.rows(); ++r) {
      const double f = poly.F(r, 0);
      if (f > 0) hi = std::min(hi, poly.g[r] / f);
      if (f < 0) lo = std::max(lo, poly.g[r] / f);
    }
    return hi > lo ? hi - lo : 0.0;
  }
  if (set.n_x() == 2) {
    try {
      return geometry::vertex_enumerate_2d(poly).area;
    } catch (const geometry::GeometryError&) {
      return kNaN;
    }
  }
  return kNaN;
}

SynthesisState solve_stage1_initial(const ProblemSpec& problem, const MatrixXd& P_init,
                                    const SynthesisOptions& opts) {
  const ProblemSpec pr = effective_problem(problem, opts);
  const int n_x = pr.system.n_x, N = pr.system.N_xi;
  SynthesisState s;
  lmi::DecisionLayout L;
  lmi::FixedPoint fx;
  fx.P0.assign(N, P_init);
  fx.Y.assign(opts.n_p, MatrixXd::Identity(n_x, n_x));

  const auto t0 = std::chrono::steady_clock::now();
  ConicProgram prog;
  auto build = [&](ConicProgram& p, double eps) {
    L = lmi::declare_layout(p, pr, opts.n_p, Stage::One, false, eps);
    lmi::Context c{p, L, fx, pr};
    lmi::add_conditions(p, lmi::assemble_stage1(c, opts.d, eps));
    p.maximize_logdet(conic::he(p.expr(L.W)));
  };
  const Attempt a = solve_with_retry(s, 1, opts, build, prog);
  if (!a.sol.ok()) {
    const std::string st = conic::to_string(a.sol.status);
    throw SynthesisError("stage-one initial problem " + st +
                             (a.sol.status == SolveStatus::Infeasible
                                  ? "; try a larger n_p or Polya degree d"
                                  : ""),
                         st);
  }
  const VectorXd& y = a.sol.y;
  s.W = prog.value(L.W, y);
  s.P.assign(N, P_init);
  extract_common(s, prog, L, y);
  for (int i = 0; i < opts.n_p; ++i) {
    s.Lambda.push_back(diag_of(prog.value(L.Lambda[i], y)));
    s.Gamma.push_back(diag_of(prog.value(L.Gamma[i], y)));
    s.phi.push_back(prog.value(L.phi[i], y)(0, 0));
  }
  for (auto h : L.Pi) s.Pi.push_back(diag_of(prog.value(h, y)));
  if (L.performance) s.Upsilon = diag_of(prog.value(L.Upsilon, y));
  s.iter_stage1 = 1;
  record(s, 1, kNaN, a.sol, a.eps, seconds_since(t0), opts);
  return s;
}

bool stage1_step(const ProblemSpec& problem, SynthesisState& s, const SynthesisOptions& opts) {
  const ProblemSpec pr = effective_problem(problem, opts);
  lmi::DecisionLayout L;
  lmi::FixedPoint fx;
  fx.P0 = s.P;
  fx.W = s.W;
  for (const auto& X : s.X) fx.Y.push_back(inverse_times(X, s.W));

  const auto t0 = std::chrono::steady_clock::now();
  ConicProgram prog;
  auto build = [&](ConicProgram& p, double eps) {
    L = lmi::declare_layout(p, pr, opts.n_p, Stage::One, true, eps);
    lmi::Context c{p, L, fx, pr};
    lmi::add_conditions(p, lmi::assemble_stage1(c, opts.d, eps));
    const AffineExpr W = p.expr(L.W);
    const AffineExpr Z = p.expr(L.Z);
    const MatrixXd G0 = fx.W.transpose() * fx.W;
    const MatrixXd W0tW0 = 0.5 * (G0 + G0.transpose());
    p.add_psd("det-increase", conic::he(W.transpose() * fx.W) - AffineExpr(W0tW0) - Z);
    p.add_psd("Z", Z, eps);
    p.maximize_logdet(Z);
  };
  const Attempt a = solve_with_retry(s, 1, opts, build, prog);
  if (!a.sol.ok()) {
    s.warnings.push_back("stage-one pass " + std::to_string(s.trace.size() + 1) + " returned " +
                         conic::to_string(a.sol.status) + "; keeping the previous iterate");
    return false;
  }
  const VectorXd& y = a.sol.y;
  s.W = prog.value(L.W, y);
  extract_common(s, prog, L, y);
  for (int i = 0; i < opts.n_p; ++i) {
    s.Lambda[i] = diag_of(prog.value(L.Lambda[i], y));
    s.Gamma[i] = diag_of(prog.value(L.Gamma[i], y));
    s.phi[i] = prog.value(L.phi[i], y)(0, 0);
  }
  for (std::size_t j = 0; j < L.Pi.size(); ++j) s.Pi[j] = diag_of(prog.value(L.Pi[j], y));
  if (L.performance) s.Upsilon = diag_of(prog.value(L.Upsilon, y));
  ++s.iter_stage1;
  record(s, 1, kNaN, a.sol, a.eps, seconds_since(t0), opts);
  return true;
}

SynthesisState iterate_stage1(const ProblemSpec& problem, SynthesisState state, const SynthesisOptions& opts) {
  while (state.iter_stage1 < opts.iters_stage1) {
    if (!stage1_step(problem, state, opts)) break;
  }
  return state;
}

VolumeCost build_volume_cost(ConicProgram& program, const std::vector<conic::VarHandle>& P,
                             const MatrixXd& W, const std::vector<SimplexPoint>& grid,
                             const std::vector<VectorXd>& samples) {
  const auto lu = W.fullPivLu();
  if (!lu.isInvertible()) throw std::invalid_argument("volume cost: W is singular");
  VolumeCost vc;
  const int Nm = static_cast<int>(grid.size()), Nn = static_cast<int>(samples.size());
  vc.sigma = program.nonneg_var("sigma", Nm, Nn, 0.0);
  for (int m = 0; m < Nm; ++m) {
    for (int n = 0; n < Nn; ++n) {
      const VectorXd v = lu.solve(samples[n]);
      AffineExpr Pv = AffineExpr::zero(program.variable(P[0]).rows, 1);
      for (std::size_t k = 0; k < P.size(); ++k) {
        if (grid[m][static_cast<int>(k)] != 0.0) Pv += grid[m][static_cast<int>(k)] * (program.expr(P[k]) * MatrixXd(v));
      }
      const int np = static_cast<int>(Pv.rows());
      const AffineExpr s = conic::scale(program.entry(vc.sigma, m, n), MatrixXd::Ones(np, 1));
      const AffineExpr one(MatrixXd::Ones(np, 1));
      const std::string tagmn = "[m=" + std::to_string(m + 1) + ",n=" + std::to_string(n + 1) + "]";
      program.add_nonneg("vol+" + tagmn, s - Pv + one);
      program.add_nonneg("vol-" + tagmn, s + Pv + one);
      vc.rows += 2 * np;
    }
  }
  program.minimize(conic::sum_entries(program.expr(vc.sigma)));
  return vc;
}

std::vector<VectorXd> volume_samples(const ProblemSpec& problem, const SynthesisOptions& opts) {
  const auto box = geometry::bounding_box(problem.constraints);
  return geometry::box_vertices_and_boundary_samples(box, opts.extra_boundary_samples, opts.seed);
}

namespace {

lmi::FixedPoint stage2_fixed(const SynthesisState& s) {
  lmi::FixedPoint fx;
  fx.P0 = s.P;
  fx.W = s.W;
  for (const auto& X : s.X) fx.Y.push_back(inverse_times(X, s.W));
  fx.Lambda0 = s.Lambda;
  fx.Pi0 = s.Pi;
  fx.Upsilon0 = s.Upsilon;
  fx.X0 = s.X;
  return fx;
}

}  // namespace

SeededProgram stage2_seeded(const ProblemSpec& problem, const SynthesisState& s, const SynthesisOptions& opts,
                            double eps) {
  const ProblemSpec pr = effective_problem(problem, opts);
  const lmi::FixedPoint fx = stage2_fixed(s);
  SeededProgram out;
  ConicProgram& p = out.program;
  const lmi::DecisionLayout L = lmi::declare_layout(p, pr, opts.n_p, Stage::Two, false, eps);
  lmi::Context c{p, L, fx, pr};
  lmi::add_conditions(p, lmi::assemble_stage2(c, opts.d, eps));

  VectorXd& y = out.y;
  y = VectorXd::Zero(p.num_scalars());
  for (std::size_t k = 0; k < L.P.size(); ++k) {
    p.set_value(L.P[k], s.P[k], y);
    p.set_value(L.Kbar[k], s.Kbar[k], y);
  }
  for (int i = 0; i < opts.n_p; ++i) {
    const double phi = s.phi[static_cast<std::size_t>(i)];
    p.set_value(L.X[i], s.X[i], y);
    for (std::size_t k = 0; k < L.V[i].size(); ++k) p.set_value(L.V[i][k], s.V[i][k], y);
    p.set_value(L.phi[i], MatrixXd::Constant(1, 1, 1.0 / phi), y);
    p.set_value(L.Lambda[i], MatrixXd(s.Lambda[i].cwiseInverse().asDiagonal()), y);
    p.set_value(L.Gamma[i], MatrixXd((s.Gamma[i] / (phi * phi)).asDiagonal()), y);
  }
  for (std::size_t j = 0; j < L.Pi.size(); ++j) {
    p.set_value(L.Pi[j], MatrixXd(s.Pi[j].asDiagonal()), y);
    p.set_value(L.PiTilde[j], MatrixXd(s.Pi[j].cwiseInverse().asDiagonal()), y);
  }
  if (L.performance) {
    p.set_value(L.Upsilon, MatrixXd(s.Upsilon.asDiagonal()), y);
    p.set_value(L.UpsilonTilde, MatrixXd(s.Upsilon.cwiseInverse().asDiagonal()), y);
    for (std::size_t k = 0; k < L.Q.size(); ++k) {
      p.set_value(L.Q[k], s.Q[k], y);
      p.set_value(L.S[k], s.S[k], y);
      p.set_value(L.F[k], s.F[k], y);
    }
  }
  return out;
}

bool stage2_step(const ProblemSpec& problem, SynthesisState& s, const SynthesisOptions& opts) {
  const ProblemSpec pr = effective_problem(problem, opts);
  lmi::DecisionLayout L;
  const lmi::FixedPoint fx = stage2_fixed(s);
  const auto grid = make_simplex_grid(pr.system.N_xi, opts.grid_resolution);
  const auto samples = volume_samples(pr, opts);

  const auto t0 = std::chrono::steady_clock::now();
  ConicProgram prog;
  auto build = [&](ConicProgram& p, double eps) {
    L = lmi::declare_layout(p, pr, opts.n_p, Stage::Two, false, eps);
    lmi::Context c{p, L, fx, pr};
    lmi::add_conditions(p, lmi::assemble_stage2(c, opts.d, eps));
    build_volume_cost(p, L.P, s.W, grid, samples);
  };
  const Attempt a = solve_with_retry(s, 2, opts, build, prog);
  if (!a.sol.ok()) {
    s.warnings.push_back("stage-two pass " + std::to_string(s.trace.size() + 1) + " returned " +
                         conic::to_string(a.sol.status) + "; keeping the previous iterate");
    return false;
  }
  const VectorXd& y = a.sol.y;
  for (std::size_t k = 0; k < L.P.size(); ++k) s.P[k] = prog.value(L.P[k], y);
  extract_common(s, prog, L, y);
  for (int i = 0; i < opts.n_p; ++i) {
    const double psi = prog.value(L.phi[i], y)(0, 0);
    s.phi[i] = 1.0 / psi;
    s.Lambda[i] = diag_of(prog.value(L.Lambda[i], y)).cwiseInverse();
    s.Gamma[i] = s.phi[i] * s.phi[i] * diag_of(prog.value(L.Gamma[i], y));
  }
  for (std::size_t j = 0; j < L.PiTilde.size(); ++j) {
    s.Pi[j] = diag_of(prog.value(L.PiTilde[j], y)).cwiseInverse();
  }
  if (L.performance) s.Upsilon = diag_of(prog.value(L.UpsilonTilde, y)).cwiseInverse();
  s.last_sigma = a.sol.objective;
  ++s.iter_stage2;
  record(s, 2, a.sol.objective, a.sol, a.eps, seconds_since(t0), opts);
  return true;
}

SynthesisResult run_algorithm1(const ProblemSpec& problem, SynthesisState state, const SynthesisOptions& opts) {
  SynthesisResult r;
  r.stage1_set = state.polytope();
  double prev = kNaN;
  while (state.iter_stage2 < opts.iters_stage2) {
    if (!stage2_step(problem, state, opts)) break;
    const double cur = state.last_sigma;
    if (opts.convergence_tol > 0 && !std::isnan(prev) &&
        std::abs(prev - cur) <= opts.convergence_tol * std::max(1.0, std::abs(prev))) {
      break;
    }
    prev = cur;
  }
  const ProblemSpec pr = effective_problem(problem, opts);
  r.set = state.polytope();
  r.K = state.gains();
  r.performance_certified = pr.performance.enabled;
  r.gamma = pr.performance.enabled ? pr.performance.gamma : 0.0;
  r.trace = state.trace;
  r.calls = state.calls;
  r.warnings = state.warnings;
  r.options = opts;
  r.min_rank_margin = std::numeric_limits<double>::infinity();
  for (const auto& xi : make_simplex_grid(pr.system.N_xi, opts.grid_resolution)) {
    r.min_rank_margin = std::min(r.min_rank_margin, geometry::slice_rank_margin(r.set, xi));
  }
  if (r.min_rank_margin <= 1e-9) r.warnings.push_back("P(xi) W^-1 is rank deficient on the grid");
  return r;
}

SynthesisResult synthesize(const ProblemSpec& problem, const SynthesisOptions& opts) {
  validate(opts, problem.system.n_x);
  const MatrixXd P_init = select_initial_P(opts.n_p, problem.system.n_x);
  SynthesisState s = solve_stage1_initial(problem, P_init, opts);
  s = iterate_stage1(problem, std::move(s), opts);
  return run_algorithm1(problem, std::move(s), opts);
}

}  // namespace pdrci::synthesis
