#include "pdrci/conic.hpp"

#include <cstdio>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

// Infeasible-start primal-dual interior-point method on
//   max b'z  s.t.  S_b = C_b - sum_j z_j A_bj  >= 0   (PSD blocks)
//                  s   = c   - A_lp z            >= 0   (LP rows)
// with the HKM search direction and Mehrotra predictor-corrector.

namespace pdrci::conic {
namespace {

struct Block {
  Index n = 0;
  MatrixXd C;
  std::vector<std::pair<int, MatrixXd>> A;
};

struct Standard {
  std::vector<Block> blocks;
  VectorXd c_lp;
  MatrixXd A_lp;  // rows x m
  VectorXd b;
  int m = 0;
};

// Problem expressed over the original scalars y.
struct Raw {
  std::vector<Block> blocks;
  std::vector<VectorXd> lp_rows;  // dense coefficient rows over y
  std::vector<double> lp_const;
  std::vector<VectorXd> eq_rows;
  std::vector<double> eq_rhs;
  VectorXd b;
};

Raw build_raw(const ConicProgram& p) {
  const int ny = p.num_scalars();
  Raw raw;
  raw.b = VectorXd::Zero(ny);
  auto push_lp = [&](double c, const VectorXd& a) {
    raw.lp_const.push_back(c);
    raw.lp_rows.push_back(a);
  };
  for (const Variable& v : p.variables()) {
    if (v.kind == VarKind::Diagonal || v.kind == VarKind::NonNegative) {
      for (int i = 0; i < v.size; ++i) {
        VectorXd a = VectorXd::Zero(ny);
        a[v.offset + i] = -1.0;
        push_lp(-v.lower, a);
      }
    }
  }
  for (const Constraint& con : p.constraints()) {
    const AffineExpr& e = con.expr;
    if (con.kind == ConstraintKind::Psd && e.rows() > 1) {
      Block blk;
      blk.n = e.rows();
      blk.C = e.constant() - con.margin * MatrixXd::Identity(e.rows(), e.rows());
      for (const auto& [index, coef] : e.terms()) {
        if (!coef.isZero(0.0)) blk.A.emplace_back(index, -coef);
      }
      raw.blocks.push_back(std::move(blk));
      continue;
    }
    for (Index i = 0; i < e.rows(); ++i) {
      for (Index j = 0; j < e.cols(); ++j) {
        if (con.kind == ConstraintKind::Psd && j != i) continue;
        VectorXd a = VectorXd::Zero(ny);
        for (const auto& [index, coef] : e.terms()) a[index] = coef(i, j);
        if (con.kind == ConstraintKind::Equality) {
          raw.eq_rows.push_back(a);
          raw.eq_rhs.push_back(-e.constant()(i, j));
        } else {
          push_lp(e.constant()(i, j) - con.margin, -a);
        }
      }
    }
  }
  const AffineExpr& obj = p.objective();
  if (p.sense() != ObjectiveSense::Feasibility) {
    const double sign = p.sense() == ObjectiveSense::Minimize ? -1.0 : 1.0;
    for (const auto& [index, coef] : obj.terms()) raw.b[index] = sign * coef(0, 0);
  }
  return raw;
}

// Maps z (solver space) to y: y = y0 + T z.
struct Reduction {
  VectorXd y0;
  MatrixXd T;
  bool infeasible = false;
  bool unbounded = false;
};

Standard reduce(const Raw& raw, int ny, Reduction& red) {
  red.y0 = VectorXd::Zero(ny);
  MatrixXd basis = MatrixXd::Identity(ny, ny);
  if (!raw.eq_rows.empty()) {
    const int ne = static_cast<int>(raw.eq_rows.size());
    MatrixXd E(ne, ny);
    VectorXd f(ne);
    for (int r = 0; r < ne; ++r) {
      E.row(r) = raw.eq_rows[static_cast<std::size_t>(r)].transpose();
      f[r] = raw.eq_rhs[static_cast<std::size_t>(r)];
    }
    Eigen::JacobiSVD<MatrixXd> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    const Index rank = svd.rank();
    red.y0 = svd.solve(f);
    if ((E * red.y0 - f).norm() > 1e-9 * (1.0 + f.norm())) {
      red.infeasible = true;
      return {};
    }
    basis = svd.matrixV().rightCols(ny - rank);
  }

  // Transform data into the basis, then drop directions that appear nowhere.
  const Index nb = basis.cols();
  std::vector<Block> blocks;
  std::vector<char> used(static_cast<std::size_t>(nb), 0);
  for (const Block& src : raw.blocks) {
    Block blk;
    blk.n = src.n;
    blk.C = src.C;
    std::map<int, MatrixXd> acc;
    for (const auto& [i, Ai] : src.A) {
      if (red.y0[i] != 0.0) blk.C -= red.y0[i] * Ai;
      for (Index j = 0; j < nb; ++j) {
        const double t = basis(i, j);
        if (t == 0.0) continue;
        auto [it, inserted] = acc.try_emplace(static_cast<int>(j), MatrixXd::Zero(src.n, src.n));
        it->second += t * Ai;
      }
    }
    for (auto& [j, Aj] : acc) {
      if (Aj.cwiseAbs().maxCoeff() > 1e-14) {
        used[static_cast<std::size_t>(j)] = 1;
        blk.A.emplace_back(j, std::move(Aj));
      }
    }
    blocks.push_back(std::move(blk));
  }
  const int nlp = static_cast<int>(raw.lp_rows.size());
  MatrixXd Alp(nlp, nb);
  VectorXd clp(nlp);
  for (int r = 0; r < nlp; ++r) {
    const VectorXd& a = raw.lp_rows[static_cast<std::size_t>(r)];
    Alp.row(r) = (a.transpose() * basis);
    clp[r] = raw.lp_const[static_cast<std::size_t>(r)] - a.dot(red.y0);
    for (Index j = 0; j < nb; ++j) {
      if (std::abs(Alp(r, j)) > 1e-14) used[static_cast<std::size_t>(j)] = 1;
    }
  }
  const VectorXd bb = basis.transpose() * raw.b;

  std::vector<int> keep;
  std::vector<int> newidx(static_cast<std::size_t>(nb), -1);
  for (Index j = 0; j < nb; ++j) {
    if (used[static_cast<std::size_t>(j)]) {
      newidx[static_cast<std::size_t>(j)] = static_cast<int>(keep.size());
      keep.push_back(static_cast<int>(j));
    } else if (std::abs(bb[j]) > 1e-14) {
      red.unbounded = true;
    }
  }
  Standard st;
  st.m = static_cast<int>(keep.size());
  red.T.resize(ny, st.m);
  st.b.resize(st.m);
  st.A_lp.resize(nlp, st.m);
  for (int k = 0; k < st.m; ++k) {
    red.T.col(k) = basis.col(keep[static_cast<std::size_t>(k)]);
    st.b[k] = bb[keep[static_cast<std::size_t>(k)]];
    st.A_lp.col(k) = Alp.col(keep[static_cast<std::size_t>(k)]);
  }
  st.c_lp = clp;
  for (Block& blk : blocks) {
    for (auto& [j, Aj] : blk.A) j = newidx[static_cast<std::size_t>(j)];
  }
  st.blocks = std::move(blocks);
  return st;
}

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

MatrixXd sym(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

// Largest step in (0, inf] keeping M + alpha * D positive definite, given L = chol(M).
double max_step(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& D) {
  const MatrixXd Linv_D = llt.matrixL().solve(D);
  const MatrixXd T = llt.matrixL().solve(Linv_D.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(T), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step_lp(const VectorXd& v, const VectorXd& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

struct Iterate {
  std::vector<MatrixXd> X, S;
  VectorXd x, s, y;
};

class Ipm {
 public:
  Ipm(const Standard& st, const Tolerances& tol) : st_(st), tol_(tol) {}

  SolveStatus run(VectorXd& y_out, SolverStats& stats);

 private:
  VectorXd apply_A(const std::vector<MatrixXd>& X, const VectorXd& x) const {
    VectorXd out = st_.A_lp.transpose() * x;
    for (std::size_t b = 0; b < st_.blocks.size(); ++b) {
      for (const auto& [j, Aj] : st_.blocks[b].A) out[j] += inner(Aj, X[b]);
    }
    return out;
  }

  // sum_j y_j A_j per block
  std::vector<MatrixXd> apply_At(const VectorXd& y) const {
    std::vector<MatrixXd> out;
    out.reserve(st_.blocks.size());
    for (const Block& blk : st_.blocks) {
      MatrixXd acc = MatrixXd::Zero(blk.n, blk.n);
      for (const auto& [j, Aj] : blk.A) acc += y[j] * Aj;
      out.push_back(std::move(acc));
    }
    return out;
  }

  const Standard& st_;
  const Tolerances& tol_;
};

SolveStatus Ipm::run(VectorXd& y_out, SolverStats& stats) {
  const int m = st_.m;
  const std::size_t nblk = st_.blocks.size();
  const Index nlp = st_.c_lp.size();

  double normC = st_.c_lp.squaredNorm();
  for (const Block& blk : st_.blocks) normC += blk.C.squaredNorm();
  normC = std::sqrt(normC);
  const double normb = st_.b.norm();

  Iterate it;
  double nu = static_cast<double>(nlp);
  for (const Block& blk : st_.blocks) {
    const double n = static_cast<double>(blk.n);
    nu += n;
    double xi = std::max(10.0, std::sqrt(n));
    double eta = std::max({10.0, std::sqrt(n), blk.C.norm()});
    for (const auto& [j, Aj] : blk.A) {
      const double na = Aj.norm();
      xi = std::max(xi, n * (1.0 + std::abs(st_.b[j])) / (1.0 + na));
      eta = std::max(eta, (1.0 + std::abs(st_.b[j])) * na / (1.0 + n));
    }
    it.X.push_back(xi * MatrixXd::Identity(blk.n, blk.n));
    it.S.push_back(eta * MatrixXd::Identity(blk.n, blk.n));
  }
  {
    double xi = 10.0;
    double eta = std::max(10.0, st_.c_lp.size() > 0 ? st_.c_lp.cwiseAbs().maxCoeff() : 0.0);
    for (int j = 0; j < m; ++j) {
      const double na = st_.A_lp.col(j).norm();
      xi = std::max(xi, (1.0 + std::abs(st_.b[j])) / (1.0 + na));
      eta = std::max(eta, na);
    }
    it.x = VectorXd::Constant(nlp, xi);
    it.s = VectorXd::Constant(nlp, eta);
  }
  it.y = VectorXd::Zero(m);
  if (nu == 0.0) {
    y_out = it.y;
    return normb > 0.0 ? SolveStatus::Unbounded : SolveStatus::Optimal;
  }

  SolveStatus status = SolveStatus::NumericalFailure;
  double best_score = std::numeric_limits<double>::infinity();
  VectorXd best_y = it.y;
  int stall = 0;
  int last_gain = 0;

  for (int iter = 0; iter < tol_.max_iterations; ++iter) {
    stats.iterations = iter;
    // residuals
    const VectorXd AX = apply_A(it.X, it.x);
    const VectorXd rp = st_.b - AX;
    const std::vector<MatrixXd> Aty = apply_At(it.y);
    std::vector<MatrixXd> Rd(nblk);
    double rd_norm2 = 0.0;
    for (std::size_t b = 0; b < nblk; ++b) {
      Rd[b] = st_.blocks[b].C - it.S[b] - Aty[b];
      rd_norm2 += Rd[b].squaredNorm();
    }
    const VectorXd rd_lp = st_.c_lp - it.s - st_.A_lp * it.y;
    rd_norm2 += rd_lp.squaredNorm();

    double pobj = st_.c_lp.dot(it.x);
    double gap = it.x.dot(it.s);
    for (std::size_t b = 0; b < nblk; ++b) {
      pobj += inner(st_.blocks[b].C, it.X[b]);
      gap += inner(it.X[b], it.S[b]);
    }
    const double dobj = st_.b.dot(it.y);
    const double mu = gap / nu;
    const double pinf = rp.norm() / (1.0 + normb);
    const double dinf = std::sqrt(rd_norm2) / (1.0 + normC);
    const double relgap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    stats.primal_residual = pinf;
    stats.dual_residual = dinf;
    stats.relative_gap = relgap;
    if (tol_.verbose) {
      std::fprintf(stderr, "%3d pobj %+.6e dobj %+.6e pinf %.2e dinf %.2e gap %.2e mu %.2e\n", iter, pobj, dobj,
                   pinf, dinf, relgap, mu);
    }

    if (dinf < tol_.relative_residual) {
      const double score = relgap + pinf;
      if (score < best_score) {
        if (score < 0.5 * best_score) last_gain = iter;
        best_score = score;
        best_y = it.y;
      }
    }
    // no halving of the best score for a while: accept what we have
    if (std::isfinite(best_score) && iter - last_gain > 10) break;
    if (relgap < tol_.relative_gap && pinf < tol_.primal_residual && dinf < tol_.relative_residual) {
      status = SolveStatus::Optimal;
      best_y = it.y;
      break;
    }
    // certificates
    if (pobj < 0.0 && AX.norm() / -pobj < 1e-8 && -pobj > 1e6 * (1.0 + normb)) {
      status = SolveStatus::Infeasible;
      break;
    }
    if (dobj > 0.0) {
      double ray = 0.0;
      for (std::size_t b = 0; b < nblk; ++b) ray += (Aty[b] + it.S[b]).squaredNorm();
      ray += (st_.A_lp * it.y + it.s).squaredNorm();
      if (std::sqrt(ray) / dobj < 1e-8 && dobj > 1e6 * (1.0 + normC)) {
        status = SolveStatus::Unbounded;
        break;
      }
    }

    // factorizations
    std::vector<MatrixXd> Sinv(nblk);
    bool chol_ok = true;
    for (std::size_t b = 0; b < nblk; ++b) {
      Eigen::LLT<MatrixXd> llt(it.S[b]);
      if (llt.info() != Eigen::Success) {
        chol_ok = false;
        break;
      }
      Sinv[b] = sym(llt.solve(MatrixXd::Identity(st_.blocks[b].n, st_.blocks[b].n)));
    }
    if (!chol_ok) break;

    // Schur complement
    MatrixXd M = MatrixXd::Zero(m, m);
    for (std::size_t b = 0; b < nblk; ++b) {
      const Block& blk = st_.blocks[b];
      std::vector<MatrixXd> G;
      G.reserve(blk.A.size());
      for (const auto& [j, Aj] : blk.A) G.push_back(it.X[b] * Aj * Sinv[b]);
      for (std::size_t q = 0; q < blk.A.size(); ++q) {
        const int j = blk.A[q].first;
        for (std::size_t p = 0; p <= q; ++p) {
          const int i = blk.A[p].first;
          const double v = inner(blk.A[p].second, G[q]);
          M(i, j) += v;
          if (i != j) M(j, i) += v;
        }
      }
    }
    if (nlp > 0) {
      const VectorXd w = it.x.cwiseQuotient(it.s);
      M.noalias() += st_.A_lp.transpose() * w.asDiagonal() * st_.A_lp;
    }
    M = sym(M);
    const double diag_max = m > 0 ? M.diagonal().cwiseAbs().maxCoeff() : 1.0;
    Eigen::LLT<MatrixXd> Mllt(M);
    if (Mllt.info() != Eigen::Success) {
      M.diagonal().array() += 1e-13 * std::max(1.0, diag_max);
      Mllt.compute(M);
    }
    Eigen::LDLT<MatrixXd> Mldlt;
    const bool use_ldlt = Mllt.info() != Eigen::Success;
    if (use_ldlt) Mldlt.compute(M);
    auto solveM = [&](const VectorXd& r) -> VectorXd {
      return use_ldlt ? VectorXd(Mldlt.solve(r)) : VectorXd(Mllt.solve(r));
    };

    struct Dir {
      std::vector<MatrixXd> dX, dS;
      VectorXd dx, ds, dy;
    };
    // rc: complementarity target per block (already multiplied by S^-1), rc_lp likewise
    auto direction = [&](const std::vector<MatrixXd>& rc, const VectorXd& rc_lp) {
      Dir d;
      VectorXd rhs = rp;
      std::vector<MatrixXd> Gb(nblk);
      for (std::size_t b = 0; b < nblk; ++b) {
        Gb[b] = rc[b] - it.X[b] * Rd[b] * Sinv[b];
        for (const auto& [j, Aj] : st_.blocks[b].A) rhs[j] -= inner(Aj, Gb[b]);
      }
      VectorXd g_lp;
      if (nlp > 0) {
        g_lp = rc_lp - it.x.cwiseQuotient(it.s).cwiseProduct(rd_lp);
        rhs -= st_.A_lp.transpose() * g_lp;
      }
      d.dy = solveM(rhs);
      const std::vector<MatrixXd> Atdy = apply_At(d.dy);
      d.dS.resize(nblk);
      d.dX.resize(nblk);
      for (std::size_t b = 0; b < nblk; ++b) {
        d.dS[b] = Rd[b] - Atdy[b];
        d.dX[b] = sym(rc[b] - it.X[b] * d.dS[b] * Sinv[b]);
      }
      if (nlp > 0) {
        d.ds = rd_lp - st_.A_lp * d.dy;
        d.dx = rc_lp - it.x.cwiseQuotient(it.s).cwiseProduct(d.ds);
      } else {
        d.ds.resize(0);
        d.dx.resize(0);
      }
      return d;
    };

    std::vector<Eigen::LLT<MatrixXd>> Xllt(nblk), Sllt(nblk);
    for (std::size_t b = 0; b < nblk; ++b) {
      Xllt[b].compute(it.X[b]);
      Sllt[b].compute(it.S[b]);
      if (Xllt[b].info() != Eigen::Success) chol_ok = false;
    }
    if (!chol_ok) break;
    auto steps = [&](const Dir& d) {
      double ap = std::numeric_limits<double>::infinity();
      double ad = ap;
      for (std::size_t b = 0; b < nblk; ++b) {
        ap = std::min(ap, max_step(Xllt[b], d.dX[b]));
        ad = std::min(ad, max_step(Sllt[b], d.dS[b]));
      }
      if (nlp > 0) {
        ap = std::min(ap, max_step_lp(it.x, d.dx));
        ad = std::min(ad, max_step_lp(it.s, d.ds));
      }
      return std::make_pair(ap, ad);
    };

    // predictor
    std::vector<MatrixXd> rc(nblk);
    for (std::size_t b = 0; b < nblk; ++b) rc[b] = -it.X[b];
    VectorXd rc_lp = -it.x;
    const Dir pred = direction(rc, rc_lp);
    auto [ap_a, ad_a] = steps(pred);
    ap_a = std::min(1.0, ap_a);
    ad_a = std::min(1.0, ad_a);
    double gap_aff = 0.0;
    for (std::size_t b = 0; b < nblk; ++b) {
      gap_aff += inner(it.X[b] + ap_a * pred.dX[b], it.S[b] + ad_a * pred.dS[b]);
    }
    if (nlp > 0) gap_aff += (it.x + ap_a * pred.dx).dot(it.s + ad_a * pred.ds);
    const double mu_aff = std::max(0.0, gap_aff / nu);
    const double sigma = std::min(1.0, std::pow(mu_aff / mu, 3.0));

    // corrector
    for (std::size_t b = 0; b < nblk; ++b) {
      rc[b] = sigma * mu * Sinv[b] - it.X[b] - pred.dX[b] * pred.dS[b] * Sinv[b];
    }
    if (nlp > 0) {
      rc_lp = (VectorXd::Constant(nlp, sigma * mu) - it.x.cwiseProduct(it.s) -
               pred.dx.cwiseProduct(pred.ds))
                  .cwiseQuotient(it.s);
    }
    const Dir dir = direction(rc, rc_lp);
    auto [ap, ad] = steps(dir);
    const double tau = 0.98;
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !dir.dy.allFinite()) break;

    // take step, backtracking if a factor loses definiteness
    Iterate next;
    bool stepped = false;
    for (int tries = 0; tries < 30; ++tries) {
      next.X.resize(nblk);
      next.S.resize(nblk);
      bool pd = true;
      for (std::size_t b = 0; b < nblk && pd; ++b) {
        next.X[b] = sym(it.X[b] + ap * dir.dX[b]);
        next.S[b] = sym(it.S[b] + ad * dir.dS[b]);
        pd = Eigen::LLT<MatrixXd>(next.X[b]).info() == Eigen::Success &&
             Eigen::LLT<MatrixXd>(next.S[b]).info() == Eigen::Success;
      }
      if (nlp > 0) {
        next.x = it.x + ap * dir.dx;
        next.s = it.s + ad * dir.ds;
        pd = pd && next.x.minCoeff() > 0.0 && next.s.minCoeff() > 0.0;
      }
      if (pd) {
        stepped = true;
        break;
      }
      ap *= 0.8;
      ad *= 0.8;
    }
    if (!stepped) break;
    next.y = it.y + ad * dir.dy;
    if (nlp == 0) {
      next.x = it.x;
      next.s = it.s;
    }
    if (std::max(ap, ad) < 1e-10) {
      if (++stall > 3) break;
    } else {
      stall = 0;
    }
    it = std::move(next);
  }

  y_out = status == SolveStatus::Optimal ? it.y : best_y;
  if (status == SolveStatus::NumericalFailure && best_score < std::numeric_limits<double>::infinity()) {
    // Dual point is feasible but optimality was not certified to tolerance.
    status = best_score < 1e-6 ? SolveStatus::Optimal : SolveStatus::Feasible;
  }
  return status;
}

}  // namespace

Solution solve(const ConicProgram& program, const Tolerances& tol) {
  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  const int ny = program.num_scalars();
  sol.y = VectorXd::Zero(ny);
  auto finish = [&]() {
    sol.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  };

  const Raw raw = build_raw(program);
  Reduction red;
  const Standard st = reduce(raw, ny, red);
  if (red.infeasible) {
    sol.status = SolveStatus::Infeasible;
    return finish();
  }
  if (red.unbounded) {
    sol.status = SolveStatus::Unbounded;
    return finish();
  }

  VectorXd z;
  Ipm ipm(st, tol);
  sol.status = ipm.run(z, sol.stats);
  sol.y = red.y0 + red.T * z;
  sol.objective = program.objective_value(sol.y);
  sol.stats.max_violation = program.max_violation(sol.y);
  if (sol.ok() && sol.stats.max_violation > tol.feasibility) {
    sol.status = SolveStatus::NumericalFailure;
  }
  return finish();
}

}  // namespace pdrci::conic
