#include "pdrci/lmi.hpp"

#include "pdrci/polya.hpp"

#include <stdexcept>

namespace pdrci::lmi {

using conic::SymmetricBlockBuilder;

namespace {

std::string tag(const std::string& family, std::initializer_list<std::pair<const char*, int>> idx) {
  std::string s = family + "[";
  bool first = true;
  for (const auto& [name, v] : idx) {
    if (!first) s += ",";
    s += name;
    s += "=" + std::to_string(v + 1);
    first = false;
  }
  return s + "]";
}

AffineExpr scalar(double v) { return AffineExpr(MatrixXd::Constant(1, 1, v)); }

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("lmi: ") + what);
}

AffineExpr checked_symmetric(AffineExpr e) { return e.is_symmetric() ? e : e.symmetrized(); }

}  // namespace

DecisionLayout declare_layout(ConicProgram& program, const ProblemSpec& problem, int n_p, Stage stage,
                              bool with_Z, double epsilon) {
  const LpvSystem& sys = problem.system;
  DecisionLayout L;
  L.stage = stage;
  L.n_x = sys.n_x;
  L.n_u = sys.n_u;
  L.n_w = sys.n_w;
  L.n_z = sys.n_z;
  L.n_g = problem.constraints.n_g();
  L.n_h = problem.constraints.n_h();
  L.n_p = n_p;
  L.N_xi = sys.N_xi;
  L.performance = problem.performance.enabled;
  L.gamma = problem.performance.gamma;
  require(n_p >= 1, "n_p must be positive");
  require(!(with_Z && stage == Stage::Two), "Z exists only in stage one");

  const bool one = stage == Stage::One;
  if (one) L.W = program.free_var("W", L.n_x, L.n_x);
  if (with_Z) L.Z = program.symmetric_var("Z", L.n_x);
  for (int k = 0; k < L.N_xi; ++k) L.Kbar.push_back(program.free_var(tag("Kbar", {{"k", k}}), L.n_u, L.n_x));
  if (!one) {
    for (int k = 0; k < L.N_xi; ++k) L.P.push_back(program.free_var(tag("P", {{"k", k}}), n_p, L.n_x));
  }
  L.V.resize(n_p);
  for (int i = 0; i < n_p; ++i) {
    for (int k = 0; k < L.N_xi; ++k) {
      L.V[i].push_back(program.free_var(tag("V", {{"i", i}, {"k", k}}), L.n_x, L.n_x));
    }
    L.X.push_back(program.symmetric_var(tag("X", {{"i", i}}), L.n_x));
    L.phi.push_back(program.diagonal_var(tag(one ? "phi" : "psi", {{"i", i}}), 1, epsilon));
    L.Lambda.push_back(program.diagonal_var(tag(one ? "Lambda" : "LambdaTilde", {{"i", i}}), n_p, epsilon));
    L.Gamma.push_back(program.diagonal_var(tag(one ? "Gamma" : "GammaBar", {{"i", i}}), L.n_g, 0.0));
  }
  for (int j = 0; j < L.n_h; ++j) {
    L.Pi.push_back(program.diagonal_var(tag("Pi", {{"j", j}}), n_p, epsilon));
    if (!one) L.PiTilde.push_back(program.diagonal_var(tag("PiTilde", {{"j", j}}), n_p, epsilon));
  }
  if (L.performance) {
    L.Upsilon = program.diagonal_var("Upsilon", n_p, epsilon);
    if (!one) L.UpsilonTilde = program.diagonal_var("UpsilonTilde", n_p, epsilon);
    for (int k = 0; k < L.N_xi; ++k) {
      L.Q.push_back(program.symmetric_var(tag("Q", {{"k", k}}), L.n_x));
      L.S.push_back(program.free_var(tag("S", {{"k", k}}), L.n_x, L.n_x));
      L.F.push_back(program.free_var(tag("F", {{"k", k}}), L.n_z, L.n_z));
    }
  }
  return L;
}

AffineExpr build_Pkl_stage1(const MatrixXd& P_init, const AffineExpr& weight) {
  require(weight.rows() == P_init.rows() && weight.cols() == 1, "Pkl weight shape");
  return conic::diag_product(P_init.transpose(), weight, P_init);
}

AffineExpr build_Pkl_stage2(const AffineExpr& P_k, const MatrixXd& P0_k, const MatrixXd& P0_l,
                            const VectorXd& bar, const AffineExpr& tilde) {
  require(P_k.rows() == P0_k.rows() && P_k.cols() == P0_k.cols(), "Pkl P shape");
  require(P0_l.rows() == P0_k.rows() && P0_l.cols() == P0_k.cols(), "Pkl P0 shape");
  require(bar.size() == P0_k.rows() && tilde.rows() == bar.size() && tilde.cols() == 1,
          "Pkl weight shape");
  const MatrixXd DPl = bar.asDiagonal() * P0_l;
  const MatrixXd PkD = P0_k.transpose() * bar.asDiagonal();
  return conic::he(P_k.transpose() * DPl) - conic::diag_product(PkD, tilde, DPl);
}

AffineExpr W_expr(const Context& c) {
  if (c.layout.stage == Stage::One) return c.program.expr(c.layout.W);
  require(c.fixed.W.rows() == c.layout.n_x && c.fixed.W.cols() == c.layout.n_x, "fixed W shape");
  return AffineExpr(c.fixed.W);
}

AffineExpr build_Pkl(const Context& c, int k, int l, Weight w, int index) {
  const DecisionLayout& L = c.layout;
  VarHandle direct, tilde;
  const VectorXd* bar = nullptr;
  switch (w) {
    case Weight::Lambda:
      direct = L.Lambda.at(index);
      tilde = L.Lambda.at(index);
      if (L.stage == Stage::Two) bar = &c.fixed.Lambda0.at(index);
      break;
    case Weight::Pi:
      direct = L.Pi.at(index);
      if (L.stage == Stage::Two) {
        tilde = L.PiTilde.at(index);
        bar = &c.fixed.Pi0.at(index);
      }
      break;
    case Weight::Upsilon:
      require(L.performance, "performance not enabled");
      direct = L.Upsilon;
      if (L.stage == Stage::Two) {
        tilde = L.UpsilonTilde;
        bar = &c.fixed.Upsilon0;
      }
      break;
  }
  if (L.stage == Stage::One) {
    require(c.fixed.P0.at(k).isApprox(c.fixed.P0.at(l), 0.0), "stage one needs a common P_init");
    return build_Pkl_stage1(c.fixed.P0.at(k), c.program.diag_vector(direct));
  }
  return build_Pkl_stage2(c.program.expr(L.P.at(k)), c.fixed.P0.at(k), c.fixed.P0.at(l), *bar,
                          c.program.diag_vector(tilde));
}

AffineExpr closed_loop_state(const Context& c, int k, int l) {
  const LpvSystem& s = c.problem.system;
  return s.A.at(k) * W_expr(c) + s.B.at(k) * c.program.expr(c.layout.Kbar.at(l));
}

AffineExpr closed_loop_output(const Context& c, int k, int l) {
  const LpvSystem& s = c.problem.system;
  return s.C.at(k) * W_expr(c) + s.D.at(k) * c.program.expr(c.layout.Kbar.at(l));
}

AffineExpr build_M_block(const Context& c, int k, int l, int i) {
  const DecisionLayout& L = c.layout;
  const LpvSystem& s = c.problem.system;
  const MatrixXd& G = c.problem.constraints.G;
  SymmetricBlockBuilder b({L.n_x, L.n_w, L.n_x, L.n_x});
  b.set(0, 0, build_Pkl(c, k, l, Weight::Lambda, i));
  b.set(1, 1, conic::diag_product(G.transpose(), c.program.diag_vector(L.Gamma.at(i)), G));
  b.set(2, 0, closed_loop_state(c, k, l));
  if (L.stage == Stage::One) {
    b.set(2, 1, AffineExpr(s.E.at(k)));
  } else {
    b.set(2, 1, conic::scale(c.program.entry(L.phi.at(i)), s.E.at(k)));
  }
  const AffineExpr V = c.program.expr(L.V.at(i).at(k));
  b.set(2, 2, conic::he(V));
  b.set(3, 2, V);
  b.set(3, 3, c.program.expr(L.X.at(i)));
  return b.build();
}

AffineExpr build_R_block(const Context& c, int k, int l, int j) {
  const DecisionLayout& L = c.layout;
  const ConstraintData& cd = c.problem.constraints;
  SymmetricBlockBuilder b({1, L.n_x});
  b.set(0, 0, scalar(2.0) - conic::sum_entries(c.program.diag_vector(L.Pi.at(j))));
  const AffineExpr row = MatrixXd(cd.H_x.row(j)) * W_expr(c) +
                         MatrixXd(cd.H_u.row(j)) * c.program.expr(L.Kbar.at(l));
  b.set(1, 0, row.transpose());
  b.set(1, 1, build_Pkl(c, k, l, Weight::Pi, j));
  return b.build();
}

AffineExpr build_N_block(const Context& c, int k, int l, int m) {
  const DecisionLayout& L = c.layout;
  require(L.performance, "performance not enabled");
  const AffineExpr S = c.program.expr(L.S.at(k));
  const AffineExpr F = c.program.expr(L.F.at(k));
  SymmetricBlockBuilder b({L.n_x, L.n_x, L.n_x, L.n_z, L.n_z});
  b.set(0, 0, conic::he(W_expr(c)) - c.program.expr(L.Q.at(k)));
  b.set(1, 0, closed_loop_state(c, k, l));
  b.set(1, 1, conic::he(S));
  b.set(2, 1, S);
  b.set(2, 2, c.program.expr(L.Q.at(m)));
  b.set(3, 0, closed_loop_output(c, k, l));
  b.set(3, 3, conic::he(F));
  b.set(4, 3, F);
  b.set(4, 4, AffineExpr::identity(L.n_z));
  return b.build();
}

AffineExpr build_L_block(const Context& c, int k, int l) {
  const DecisionLayout& L = c.layout;
  require(L.performance, "performance not enabled");
  SymmetricBlockBuilder b({1, L.n_x, L.n_x});
  b.set(0, 0, scalar(L.gamma) - conic::sum_entries(c.program.diag_vector(L.Upsilon)));
  b.set(1, 1, build_Pkl(c, k, l, Weight::Upsilon, 0));
  b.set(2, 1, W_expr(c));
  b.set(2, 2, c.program.expr(L.Q.at(k)));
  return b.build();
}

std::vector<AffineExpr> polya_family(int d, int N_xi, const std::function<AffineExpr(int, int)>& block) {
  require(d >= 0 && d + 2 <= polya::kMaxDegree, "Polya degree out of range");
  require(N_xi >= 1, "N_xi must be positive");
  const auto betas = polya::enumerate_exponents(d + 2, N_xi);
  std::vector<AffineExpr> diag(N_xi);
  std::vector<std::vector<AffineExpr>> pair(N_xi, std::vector<AffineExpr>(N_xi));
  for (int k = 0; k < N_xi; ++k) {
    diag[k] = block(k, k);
    for (int l = k + 1; l < N_xi; ++l) pair[k][l] = block(k, l) + block(l, k);
  }
  std::vector<AffineExpr> out;
  out.reserve(betas.size());
  for (const auto& beta : betas) {
    AffineExpr sum = AffineExpr::zero(diag[0].rows(), diag[0].cols());
    for (int k = 0; k < N_xi; ++k) {
      const auto a = polya::modified_coeff_single(beta, k, 2);
      if (a != 0) sum += static_cast<double>(a) * diag[k];
      for (int l = k + 1; l < N_xi; ++l) {
        const auto b = polya::modified_coeff_pair(beta, k, l, 1, 1);
        if (b != 0) sum += static_cast<double>(b) * pair[k][l];
      }
    }
    out.push_back(checked_symmetric(std::move(sum)));
  }
  return out;
}

namespace {

AffineExpr corner(const Context& c, int i) {
  const AffineExpr W = W_expr(c);
  const MatrixXd& Y = c.fixed.Y.at(i);
  return conic::he(W.transpose() * Y) - Y.transpose() * c.program.expr(c.layout.X.at(i)) * Y;
}

void add_families(const Context& c, int d, double eps, std::vector<AssembledCondition>& out) {
  const DecisionLayout& L = c.layout;
  const int N = L.N_xi;
  for (int i = 0; i < L.n_p; ++i) {
    auto fam = polya_family(d, N, [&](int k, int l) { return build_M_block(c, k, l, i); });
    for (std::size_t q = 0; q < fam.size(); ++q) {
      out.push_back({tag("inv-M", {{"i", i}, {"q", static_cast<int>(q)}}), "inv-M", ConditionKind::Psd,
                     std::move(fam[q]), eps});
    }
  }
  for (int j = 0; j < L.n_h; ++j) {
    auto fam = polya_family(d, N, [&](int k, int l) { return build_R_block(c, k, l, j); });
    for (std::size_t q = 0; q < fam.size(); ++q) {
      out.push_back({tag("sys-R", {{"j", j}, {"q", static_cast<int>(q)}}), "sys-R", ConditionKind::Psd,
                     std::move(fam[q]), eps});
    }
  }
  if (!L.performance) return;
  for (int m = 0; m < N; ++m) {
    auto fam = polya_family(d, N, [&](int k, int l) { return build_N_block(c, k, l, m); });
    for (std::size_t q = 0; q < fam.size(); ++q) {
      out.push_back({tag("perf-N", {{"m", m}, {"q", static_cast<int>(q)}}), "perf-N", ConditionKind::Psd,
                     std::move(fam[q]), eps});
    }
  }
  auto fam = polya_family(d, N, [&](int k, int l) { return build_L_block(c, k, l); });
  for (std::size_t q = 0; q < fam.size(); ++q) {
    out.push_back({tag("perf-L", {{"q", static_cast<int>(q)}}), "perf-L", ConditionKind::Psd,
                   std::move(fam[q]), eps});
  }
}

void check_fixed(const Context& c, Stage stage) {
  const DecisionLayout& L = c.layout;
  require(L.stage == stage, "layout/stage mismatch");
  require(static_cast<int>(c.fixed.P0.size()) == L.N_xi, "fixed P0 count");
  require(static_cast<int>(c.fixed.Y.size()) == L.n_p, "fixed Y count");
  for (const auto& Y : c.fixed.Y) require(Y.allFinite(), "fixed Y not finite");
  if (stage == Stage::Two) {
    require(static_cast<int>(c.fixed.Lambda0.size()) == L.n_p, "fixed Lambda0 count");
    require(static_cast<int>(c.fixed.Pi0.size()) == L.n_h, "fixed Pi0 count");
    for (const auto& v : c.fixed.Lambda0) require((v.array() > 0).all(), "Lambda0 not positive");
    for (const auto& v : c.fixed.Pi0) require((v.array() > 0).all(), "Pi0 not positive");
    if (L.performance) require((c.fixed.Upsilon0.array() > 0).all(), "Upsilon0 not positive");
  }
}

AffineExpr coupling(const ConicProgram& p, VarHandle direct, VarHandle tilde, int n) {
  SymmetricBlockBuilder b({n, n});
  b.set(0, 0, p.expr(direct));
  b.set(1, 0, AffineExpr::identity(n));
  b.set(1, 1, p.expr(tilde));
  return b.build();
}

}  // namespace

std::vector<AssembledCondition> assemble_stage1(const Context& c, int d, double epsilon) {
  check_fixed(c, Stage::One);
  const DecisionLayout& L = c.layout;
  const MatrixXd& P_init = c.fixed.P0.front();
  std::vector<AssembledCondition> out;
  for (int i = 0; i < L.n_p; ++i) {
    const AffineExpr phi = c.program.entry(L.phi[i]);
    SymmetricBlockBuilder b({L.n_x, 1});
    b.set(0, 0, corner(c, i));
    b.set(1, 0, conic::scale(phi, P_init.row(i)));
    b.set(1, 1, phi);
    out.push_back({tag("inv-a", {{"i", i}}), "inv-a", ConditionKind::Psd, checked_symmetric(b.build()), epsilon});
  }
  for (int i = 0; i < L.n_p; ++i) {
    AffineExpr r = c.program.entry(L.phi[i]) - conic::sum_entries(c.program.diag_vector(L.Lambda[i])) -
                   conic::sum_entries(c.program.diag_vector(L.Gamma[i]));
    out.push_back({tag("inv-b", {{"i", i}}), "inv-b", ConditionKind::Scalar, std::move(r), epsilon});
  }
  add_families(c, d, epsilon, out);
  return out;
}

std::vector<AssembledCondition> assemble_stage2(const Context& c, int d, double epsilon) {
  check_fixed(c, Stage::Two);
  const DecisionLayout& L = c.layout;
  std::vector<AssembledCondition> out;
  for (int i = 0; i < L.n_p; ++i) {
    const AffineExpr psi = c.program.entry(L.phi[i]);
    const AffineExpr cr = corner(c, i);
    for (int k = 0; k < L.N_xi; ++k) {
      SymmetricBlockBuilder b({L.n_x, 1});
      b.set(0, 0, cr);
      b.set(1, 0, c.program.expr(L.P[k]).block(i, 0, 1, L.n_x));
      b.set(1, 1, psi);
      out.push_back({tag("inv-a", {{"i", i}, {"k", k}}), "inv-a", ConditionKind::Psd,
                     checked_symmetric(b.build()), epsilon});
    }
  }
  for (int i = 0; i < L.n_p; ++i) {
    const AffineExpr psi = c.program.entry(L.phi[i]);
    SymmetricBlockBuilder b({1, L.n_p});
    b.set(0, 0, psi - conic::sum_entries(c.program.diag_vector(L.Gamma[i])));
    b.set(1, 0, conic::scale(psi, MatrixXd::Ones(L.n_p, 1)));
    b.set(1, 1, c.program.expr(L.Lambda[i]));
    out.push_back({tag("inv-b", {{"i", i}}), "inv-b", ConditionKind::Psd, b.build(), 0.0});
  }
  add_families(c, d, epsilon, out);
  for (int j = 0; j < L.n_h; ++j) {
    out.push_back({tag("couple-Pi", {{"j", j}}), "couple-Pi", ConditionKind::Psd,
                   coupling(c.program, L.Pi[j], L.PiTilde[j], L.n_p), 0.0});
  }
  if (L.performance) {
    out.push_back({"couple-Ups", "couple-Ups", ConditionKind::Psd,
                   coupling(c.program, L.Upsilon, L.UpsilonTilde, L.n_p), 0.0});
  }
  return out;
}

void add_conditions(ConicProgram& program, const std::vector<AssembledCondition>& conditions) {
  for (const auto& cond : conditions) {
    if (cond.kind == ConditionKind::Scalar) {
      program.add_nonneg(cond.label, cond.expr, cond.margin);
    } else {
      program.add_psd(cond.label, cond.expr, cond.margin);
    }
  }
}

ConditionCounts count_conditions(const std::vector<AssembledCondition>& conditions) {
  ConditionCounts n;
  for (const auto& c : conditions) {
    if (c.family.rfind("inv-", 0) == 0) ++n.invariance;
    else if (c.family == "sys-R") ++n.system;
    else if (c.family.rfind("perf-", 0) == 0) ++n.performance;
    else if (c.family.rfind("couple-", 0) == 0) ++n.coupling;
  }
  return n;
}

ConditionCounts expected_counts(Stage stage, int n_p, int n_h, int N_xi, int d, bool performance) {
  const int Lq = static_cast<int>(polya::tuple_count(d + 2, N_xi));
  ConditionCounts n;
  n.invariance = n_p * ((stage == Stage::One ? 1 : N_xi) + 1 + Lq);
  n.system = n_h * Lq;
  n.performance = performance ? (N_xi + 1) * Lq : 0;
  n.coupling = stage == Stage::Two ? n_h + (performance ? 1 : 0) : 0;
  return n;
}

}  // namespace pdrci::lmi
