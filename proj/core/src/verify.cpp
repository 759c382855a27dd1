#include "pdrci/verify.hpp"

#include "pdrci/lmi.hpp"
#include "pdrci/polya.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace pdrci::verify {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

MatrixXd K_at(const std::vector<MatrixXd>& K, const SimplexPoint& xi) {
  MatrixXd out = MatrixXd::Zero(K.front().rows(), K.front().cols());
  for (int k = 0; k < xi.size(); ++k) out += xi[k] * K[k];
  return out;
}

double max_abs_minus_one(const MatrixXd& PWinv, const VectorXd& x) {
  return (PWinv * x).cwiseAbs().maxCoeff() - 1.0;
}

SimplexPoint draw_xi(int n, XiMode mode, std::mt19937_64& rng) {
  const bool vertex = mode == XiMode::Vertex || (mode == XiMode::Mixed && unit(rng) < 0.25);
  if (vertex) return SimplexPoint::vertex(n, static_cast<int>(rng() % static_cast<std::uint64_t>(n)));
  return random_simplex_point(n, rng);
}

/// Point in S(xi): slice vertices (planar) a quarter of the time, ray scaling otherwise.
VectorXd draw_x(const geometry::ParamPolytope& set, const SimplexPoint& xi, std::mt19937_64& rng) {
  const MatrixXd PWinv = set.P_at(xi) * set.W.inverse();
  if (set.n_x() == 2 && unit(rng) < 0.25) {
    const auto poly = geometry::vertex_enumerate_2d(geometry::slice(set, xi));
    const auto& v = poly.vertices[rng() % poly.vertices.size()];
    return VectorXd(v);
  }
  return sample_in_set(PWinv, rng);
}

class DisturbanceSampler {
 public:
  explicit DisturbanceSampler(const MatrixXd& G) : G_(G) {
    n_ = static_cast<int>(G.cols());
    if (G.rows() == G.cols()) {
      const auto lu = G.fullPivLu();
      if (lu.isInvertible()) {
        Ginv_ = lu.inverse();
        square_ = true;
      }
    }
    if (!square_) {
      geometry::HPolytope h;
      h.F.resize(2 * G.rows(), G.cols());
      h.F << G, -G;
      h.g = VectorXd::Ones(2 * G.rows());
      box_ = geometry::bounding_box(h);
    }
  }

  VectorXd draw(std::mt19937_64& rng) const {
    if (square_) {
      VectorXd v(G_.rows());
      for (Eigen::Index r = 0; r < v.size(); ++r) {
        v[r] = unit(rng) < 0.5 ? (unit(rng) < 0.5 ? -1.0 : 1.0) : 2.0 * unit(rng) - 1.0;
      }
      return Ginv_ * v;
    }
    for (int attempt = 0; attempt < 1000; ++attempt) {
      VectorXd w(n_);
      for (int i = 0; i < n_; ++i) w[i] = box_.lower[i] + (box_.upper[i] - box_.lower[i]) * unit(rng);
      if ((G_ * w).cwiseAbs().maxCoeff() <= 1.0) return w;
    }
    return VectorXd::Zero(n_);
  }

 private:
  MatrixXd G_, Ginv_;
  geometry::Box box_;
  int n_ = 0;
  bool square_ = false;
};

void note(CheckReport& r, double margin, double tol) {
  ++r.trials;
  if (!std::isfinite(margin) || margin > tol) ++r.violations;
  if (!std::isfinite(margin)) {
    r.worst_margin = std::numeric_limits<double>::infinity();
  } else {
    r.worst_margin = std::max(r.worst_margin, margin);
  }
}

}  // namespace

bool VerificationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed(); });
}

std::int64_t VerificationReport::trials() const {
  std::int64_t n = 0;
  for (const auto& c : checks) n += c.trials;
  return n;
}

std::int64_t VerificationReport::violations() const {
  std::int64_t n = 0;
  for (const auto& c : checks) n += c.violations;
  return n;
}

SimplexPoint random_simplex_point(int n, std::mt19937_64& rng) {
  VectorXd e(n);
  for (int k = 0; k < n; ++k) e[k] = -std::log(1.0 - unit(rng));
  e /= e.sum();
  return SimplexPoint(e, 1e-9);
}

VectorXd sample_in_set(const MatrixXd& PWinv, std::mt19937_64& rng) {
  const int n = static_cast<int>(PWinv.cols());
  VectorXd d(n);
  do {
    for (int i = 0; i < n; ++i) d[i] = gaussian(rng);
  } while (d.norm() == 0.0);
  const double t_max = 1.0 / (PWinv * d).cwiseAbs().maxCoeff();
  const double s = unit(rng) < 0.25 ? 1.0 : std::pow(unit(rng), 1.0 / n);
  return s * t_max * d;
}

CheckReport check_invariance(const Certificate& c, const ProblemSpec& problem, std::int64_t trials,
                             std::uint64_t seed, const SamplingOptions& opts) {
  CheckReport r{"invariance"};
  r.seed = seed;
  const LpvSystem& sys = problem.system;
  const int N = sys.N_xi;
  const MatrixXd Winv = c.set.W.inverse();
  std::vector<MatrixXd> PkWinv;
  for (const auto& P : c.set.P) PkWinv.push_back(P * Winv);
  const DisturbanceSampler ws(problem.constraints.G);
  std::mt19937_64 rng(seed);
  r.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t < trials; ++t) {
    const SimplexPoint xi = draw_xi(N, opts.mode, rng);
    const SimplexPoint xi_next = draw_xi(N, opts.mode, rng);
    const VectorXd x = draw_x(c.set, xi, rng);
    const VectorXd w = ws.draw(rng);
    const SystemMatrices m = evaluate_system(sys, xi);
    const MatrixXd AK = m.A + m.B * K_at(c.K, xi);
    const MatrixXd Pn = c.set.P_at(xi_next) * Winv;
    double worst = -std::numeric_limits<double>::infinity();
    for (double sgn : {1.0, -1.0}) {
      const VectorXd xp = AK * (sgn * x) + m.E * (sgn * w);
      worst = std::max(worst, max_abs_minus_one(Pn, xp));
      for (int k = 0; k < N; ++k) worst = std::max(worst, max_abs_minus_one(PkWinv[k], xp));
    }
    note(r, worst, opts.tol);
  }
  return r;
}

CheckReport check_system_constraints(const Certificate& c, const ProblemSpec& problem, int grid_resolution,
                                     std::int64_t trials, std::uint64_t seed, const SamplingOptions& opts) {
  CheckReport r{"system_constraints"};
  r.seed = seed;
  const auto& cd = problem.constraints;
  const int N = problem.system.N_xi;
  r.worst_margin = -std::numeric_limits<double>::infinity();
  if (cd.n_h() == 0) return r;
  auto eval = [&](const SimplexPoint& xi, const VectorXd& x) {
    const VectorXd h = (cd.H_x + cd.H_u * K_at(c.K, xi)) * x;
    note(r, h.maxCoeff() - 1.0, opts.tol);
  };
  const MatrixXd Winv = c.set.W.inverse();
  for (const auto& beta : polya::enumerate_exponents(grid_resolution, N)) {
    VectorXd v(N);
    for (int k = 0; k < N; ++k) v[k] = static_cast<double>(beta[k]) / grid_resolution;
    const SimplexPoint xi(v);
    if (c.set.n_x() == 2) {
      for (const auto& p : geometry::vertex_enumerate_2d(geometry::slice(c.set, xi)).vertices) eval(xi, p);
    } else if (c.set.n_x() == 1) {
      const double half = 1.0 / (c.set.P_at(xi) * Winv).cwiseAbs().maxCoeff();
      eval(xi, VectorXd::Constant(1, half));
      eval(xi, VectorXd::Constant(1, -half));
    }
  }
  std::mt19937_64 rng(seed);
  for (std::int64_t t = 0; t < trials; ++t) {
    const SimplexPoint xi = draw_xi(N, opts.mode, rng);
    eval(xi, draw_x(c.set, xi, rng));
  }
  return r;
}

CheckReport check_performance(const Certificate& c, const ProblemSpec& problem, double gamma, std::int64_t runs,
                              int horizon, std::uint64_t seed, const SamplingOptions& opts) {
  CheckReport r{"performance"};
  r.seed = seed;
  const LpvSystem& sys = problem.system;
  const int N = sys.N_xi;
  std::mt19937_64 rng(seed);
  r.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::int64_t run = 0; run < runs; ++run) {
    std::vector<SimplexPoint> sched;
    for (int t = 0; t < horizon; ++t) sched.push_back(draw_xi(N, opts.mode, rng));
    const VectorXd x0 = draw_x(c.set, sched.front(), rng);
    const Trajectory tr = simulate_closed_loop(problem, c.K, x0, sched, {}, horizon);
    double J = 0.0;
    for (const auto& z : tr.z) J += z.squaredNorm();
    r.max_value = std::max(r.max_value, J);
    double margin = J - gamma;
    const double tail = tr.x.back().norm();
    if (!(tail < 1e-3)) margin = std::max(margin, std::isfinite(tail) ? opts.tol + tail : tail);
    note(r, margin, opts.tol);
  }
  return r;
}

CheckReport check_containment(const Certificate& c, std::int64_t trials, std::uint64_t seed) {
  CheckReport r{"containment"};
  r.seed = seed;
  const auto poly = geometry::robust_intersection(c.set);
  const auto box = geometry::bounding_box(poly);
  const MatrixXd Winv = c.set.W.inverse();
  std::mt19937_64 rng(seed);
  r.worst_margin = -std::numeric_limits<double>::infinity();
  const int n = c.set.n_x();
  std::int64_t attempts = 0;
  while (r.trials < trials && attempts < 1000 * trials) {
    ++attempts;
    VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
    if (!geometry::membership(poly, x)) continue;
    const SimplexPoint xi = random_simplex_point(c.set.N_xi(), rng);
    note(r, max_abs_minus_one(c.set.P_at(xi) * Winv, x), 1e-12);
  }
  return r;
}

Trajectory simulate_closed_loop(const ProblemSpec& problem, const std::vector<MatrixXd>& K, const VectorXd& x0,
                                const Schedule& schedule, const std::vector<VectorXd>& w, int T) {
  const LpvSystem& sys = problem.system;
  Trajectory tr;
  tr.x.push_back(x0);
  const auto* seq = std::get_if<std::vector<SimplexPoint>>(&schedule);
  const auto* map = std::get_if<QlpvMap>(&schedule);
  if (seq && static_cast<int>(seq->size()) < T) throw ModelError("schedule: shorter than the horizon");
  const bool nonlinear = map && problem.has_nonlinear_dynamics();
  for (int t = 0; t < T; ++t) {
    const VectorXd& x = tr.x.back();
    SimplexPoint xi = SimplexPoint::barycenter(sys.N_xi);
    if (seq) {
      xi = (*seq)[t];
    } else {
      if (!map->in_validity(x, 1e-12)) {
        tr.left_validity = true;
        break;
      }
      VectorXd xc = x.cwiseMax(map->lower).cwiseMin(map->upper);
      xi = map->evaluate(xc);
    }
    const SystemMatrices m = evaluate_system(sys, xi);
    const VectorXd u = K_at(K, xi) * x;
    const VectorXd wt = t < static_cast<int>(w.size()) ? w[t] : VectorXd::Zero(sys.n_w);
    VectorXd xp = m.E * wt;
    xp += nonlinear ? problem.nonlinear_step(x, u) : VectorXd(m.A * x + m.B * u);
    tr.xi.push_back(xi);
    tr.u.push_back(u);
    tr.w.push_back(wt);
    tr.z.push_back(m.C * x + m.D * u);
    tr.x.push_back(std::move(xp));
  }
  return tr;
}

PropertyResult check_linearization_bound(int samples, std::uint64_t seed) {
  PropertyResult res;
  res.passed = true;
  res.worst = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  auto randn = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = gaussian(rng);
    return m;
  };
  for (int s = 0; s < samples; ++s) {
    const int n = 1 + static_cast<int>(rng() % 4), m = 1 + static_cast<int>(rng() % 4);
    const MatrixXd R = randn(n, n);
    const MatrixXd M = R * R.transpose() + 0.1 * MatrixXd::Identity(n, n);
    const MatrixXd L = randn(n, m);
    const MatrixXd Minv_L = M.ldlt().solve(L);
    const MatrixXd Y = s % 4 == 0 ? Minv_L : randn(n, m);
    const MatrixXd LY = L.transpose() * Y;
    MatrixXd D = L.transpose() * Minv_L - (LY + LY.transpose() - Y.transpose() * M * Y);
    D = (0.5 * (D + D.transpose())).eval();
    const double lo = Eigen::SelfAdjointEigenSolver<MatrixXd>(D, Eigen::EigenvaluesOnly).eigenvalues()(0);
    res.worst = std::min(res.worst, lo);
    if (lo < -1e-9) res.passed = false;
    ++res.instances;
  }
  return res;
}

PropertyResult check_assembly_oracle(int d_max, int N_xi_max, std::uint64_t seed) {
  using Key = std::vector<int>;
  PropertyResult res;
  res.passed = true;
  std::mt19937_64 rng(seed);
  const int n = 3;
  auto rint = [&]() { return static_cast<double>(static_cast<int>(rng() % 11) - 5); };
  for (int N = 1; N <= N_xi_max; ++N) {
    for (int d = 0; d <= d_max; ++d) {
      std::vector<std::vector<MatrixXd>> B(N, std::vector<MatrixXd>(N));
      for (int k = 0; k < N; ++k) {
        for (int l = k; l < N; ++l) {
          MatrixXd m(n, n);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = rint();
          if (k == l) m = (m + m.transpose()).eval();
          B[k][l] = m;
          B[l][k] = m.transpose();
        }
      }
      std::map<Key, MatrixXd> poly;
      for (int k = 0; k < N; ++k) {
        for (int l = 0; l < N; ++l) {
          Key e(N, 0);
          ++e[k];
          ++e[l];
          auto [it, fresh] = poly.try_emplace(e, MatrixXd::Zero(n, n));
          it->second += B[k][l];
        }
      }
      for (int step = 0; step < d; ++step) {
        std::map<Key, MatrixXd> next;
        for (const auto& [e, m] : poly) {
          for (int j = 0; j < N; ++j) {
            Key f = e;
            ++f[j];
            auto [it, fresh] = next.try_emplace(f, MatrixXd::Zero(n, n));
            it->second += m;
          }
        }
        poly = std::move(next);
      }
      const auto fam = lmi::polya_family(d, N, [&](int k, int l) { return conic::AffineExpr(B[k][l]); });
      const auto betas = polya::enumerate_exponents(d + 2, N);
      if (fam.size() != betas.size() || poly.size() != betas.size()) res.passed = false;
      for (std::size_t q = 0; q < betas.size() && q < fam.size(); ++q) {
        const auto it = poly.find(betas[q]);
        const MatrixXd expect = it == poly.end() ? MatrixXd::Zero(n, n) : it->second;
        const double diff = (fam[q].constant() - expect).cwiseAbs().maxCoeff();
        res.worst = std::max(res.worst, diff);
        if (diff != 0.0) res.passed = false;
      }
      ++res.instances;
    }
  }
  return res;
}

std::vector<VectorXd> robust_set_vertices(const geometry::ParamPolytope& set) {
  std::vector<VectorXd> out;
  for (const auto& v : geometry::vertex_enumerate_2d(geometry::robust_intersection(set)).vertices) out.emplace_back(v);
  return out;
}

CheckReport check_qlpv_vertices(const Certificate& c, const ProblemSpec& problem, int steps, double tol) {
  if (!problem.qlpv.enabled()) throw ModelError("qlpv vertex check: problem has no scheduling map");
  CheckReport r{"qlpv-vertices"};
  const auto poly = geometry::robust_intersection(c.set);
  const ConstraintData& cd = problem.constraints;
  r.worst_margin = -std::numeric_limits<double>::infinity();
  for (const VectorXd& v : robust_set_vertices(c.set)) {
    const Trajectory tr = simulate_closed_loop(problem, c.K, v, problem.qlpv, {}, steps);
    ++r.trials;
    bool bad = tr.left_validity || tr.steps() < steps;
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < tr.steps(); ++t) {
      const VectorXd& x = tr.x[static_cast<std::size_t>(t) + 1];
      worst = std::max(worst, (poly.F * x - poly.g).maxCoeff());
      worst = std::max(worst, (cd.H_x * tr.x[static_cast<std::size_t>(t)] + cd.H_u * tr.u[static_cast<std::size_t>(t)])
                                  .maxCoeff() - 1.0);
      r.max_value = std::max(r.max_value, tr.u[static_cast<std::size_t>(t)].cwiseAbs().maxCoeff());
    }
    r.worst_margin = std::max(r.worst_margin, worst);
    if (bad || worst > tol) ++r.violations;
  }
  return r;
}

VerificationReport verify_all(const Certificate& c, const ProblemSpec& problem, double gamma, bool performance,
                              std::int64_t trials, std::uint64_t seed) {
  VerificationReport rep;
  rep.checks.push_back(check_invariance(c, problem, trials, seed));
  rep.checks.push_back(check_system_constraints(c, problem, 4, std::max<std::int64_t>(1, trials / 10), seed + 1));
  rep.checks.push_back(check_containment(c, std::min<std::int64_t>(trials, 10000), seed + 2));
  if (performance) rep.checks.push_back(check_performance(c, problem, gamma, 100, 200, seed + 3));
  if (problem.qlpv.enabled() && c.set.n_x() == 2) rep.checks.push_back(check_qlpv_vertices(c, problem));
  return rep;
}

}  // namespace pdrci::verify
