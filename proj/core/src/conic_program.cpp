#include "pdrci/conic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pdrci::conic {

VarHandle ConicProgram::add_variable(std::string name, VarKind kind, int rows, int cols, int size,
                                     double lower) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("variable '" + name + "' has empty shape");
  Variable v;
  v.name = std::move(name);
  v.kind = kind;
  v.rows = rows;
  v.cols = cols;
  v.offset = num_scalars_;
  v.size = size;
  v.lower = lower;
  variables_.push_back(std::move(v));
  num_scalars_ += size;
  return VarHandle{static_cast<int>(variables_.size()) - 1};
}

VarHandle ConicProgram::free_var(std::string name, int rows, int cols) {
  return add_variable(std::move(name), VarKind::Free, rows, cols, rows * cols, 0.0);
}

VarHandle ConicProgram::symmetric_var(std::string name, int n) {
  return add_variable(std::move(name), VarKind::Symmetric, n, n, n * (n + 1) / 2, 0.0);
}

VarHandle ConicProgram::diagonal_var(std::string name, int n, double lower) {
  return add_variable(std::move(name), VarKind::Diagonal, n, n, n, lower);
}

VarHandle ConicProgram::nonneg_var(std::string name, int rows, int cols, double lower) {
  return add_variable(std::move(name), VarKind::NonNegative, rows, cols, rows * cols, lower);
}

const Variable& ConicProgram::variable(VarHandle v) const {
  if (v.id < 0 || v.id >= static_cast<int>(variables_.size())) {
    throw std::out_of_range("invalid variable handle");
  }
  return variables_[static_cast<std::size_t>(v.id)];
}

AffineExpr ConicProgram::expr(VarHandle h) const {
  const Variable& v = variable(h);
  AffineExpr out(v.rows, v.cols);
  switch (v.kind) {
    case VarKind::Free:
    case VarKind::NonNegative:
      for (int i = 0; i < v.rows; ++i) {
        for (int j = 0; j < v.cols; ++j) {
          MatrixXd c = MatrixXd::Zero(v.rows, v.cols);
          c(i, j) = 1.0;
          out.add_term(v.offset + i * v.cols + j, c);
        }
      }
      break;
    case VarKind::Symmetric: {
      int idx = v.offset;
      for (int i = 0; i < v.rows; ++i) {
        for (int j = i; j < v.cols; ++j) {
          MatrixXd c = MatrixXd::Zero(v.rows, v.cols);
          c(i, j) = 1.0;
          c(j, i) = 1.0;
          out.add_term(idx++, c);
        }
      }
      break;
    }
    case VarKind::Diagonal:
      for (int i = 0; i < v.rows; ++i) {
        MatrixXd c = MatrixXd::Zero(v.rows, v.cols);
        c(i, i) = 1.0;
        out.add_term(v.offset + i, c);
      }
      break;
  }
  return out;
}

AffineExpr ConicProgram::diag_vector(VarHandle h) const {
  const Variable& v = variable(h);
  if (v.kind != VarKind::Diagonal) throw std::invalid_argument("diag_vector: not a diagonal variable");
  AffineExpr out(v.rows, 1);
  for (int i = 0; i < v.rows; ++i) {
    MatrixXd c = MatrixXd::Zero(v.rows, 1);
    c(i, 0) = 1.0;
    out.add_term(v.offset + i, c);
  }
  return out;
}

AffineExpr ConicProgram::entry(VarHandle h, int i, int j) const {
  const Variable& v = variable(h);
  if (i < 0 || j < 0 || i >= v.rows || j >= v.cols) throw std::out_of_range("entry: index");
  AffineExpr out(1, 1);
  const MatrixXd one = MatrixXd::Ones(1, 1);
  switch (v.kind) {
    case VarKind::Free:
    case VarKind::NonNegative:
      out.add_term(v.offset + i * v.cols + j, one);
      break;
    case VarKind::Symmetric: {
      const int a = std::min(i, j);
      const int b = std::max(i, j);
      // upper triangle stored row by row
      const int idx = a * v.cols - a * (a - 1) / 2 + (b - a);
      out.add_term(v.offset + idx, one);
      break;
    }
    case VarKind::Diagonal:
      if (i == j) out.add_term(v.offset + i, one);
      break;
  }
  return out;
}

void ConicProgram::add_psd(std::string label, const AffineExpr& e, double margin) {
  if (e.rows() != e.cols()) throw std::invalid_argument("add_psd '" + label + "': not square");
  if (!e.is_symmetric()) throw std::invalid_argument("add_psd '" + label + "': not symmetric");
  for (const auto& [index, coef] : e.terms()) {
    if (index < 0 || index >= num_scalars_) {
      throw std::invalid_argument("add_psd '" + label + "': unknown scalar");
    }
    if (coef.rows() != e.rows() || coef.cols() != e.cols()) {
      throw std::invalid_argument("add_psd '" + label + "': coefficient shape mismatch");
    }
  }
  constraints_.push_back({std::move(label), ConstraintKind::Psd, e, margin});
}

void ConicProgram::add_nonneg(std::string label, const AffineExpr& e, double margin) {
  for (const auto& [index, coef] : e.terms()) {
    (void)coef;
    if (index < 0 || index >= num_scalars_) {
      throw std::invalid_argument("add_nonneg '" + label + "': unknown scalar");
    }
  }
  constraints_.push_back({std::move(label), ConstraintKind::NonNegative, e, margin});
}

void ConicProgram::add_equal(std::string label, const AffineExpr& e) {
  for (const auto& [index, coef] : e.terms()) {
    (void)coef;
    if (index < 0 || index >= num_scalars_) {
      throw std::invalid_argument("add_equal '" + label + "': unknown scalar");
    }
  }
  constraints_.push_back({std::move(label), ConstraintKind::Equality, e, 0.0});
}

void ConicProgram::minimize(const AffineExpr& objective) {
  if (objective.rows() != 1 || objective.cols() != 1) {
    throw std::invalid_argument("objective must be 1x1");
  }
  sense_ = ObjectiveSense::Minimize;
  objective_ = objective;
}

void ConicProgram::maximize(const AffineExpr& objective) {
  if (objective.rows() != 1 || objective.cols() != 1) {
    throw std::invalid_argument("objective must be 1x1");
  }
  sense_ = ObjectiveSense::Maximize;
  objective_ = objective;
}

void ConicProgram::maximize_logdet(const AffineExpr& symmetric) {
  LogDetReduction r = reduce_logdet(*this, symmetric);
  sense_ = ObjectiveSense::MaximizeLogDet;
  objective_ = r.root;
  logdet_ = std::move(r);
}

void ConicProgram::set_value(VarHandle h, const MatrixXd& m, VectorXd& y) const {
  const Variable& v = variable(h);
  if (m.rows() != v.rows || m.cols() != v.cols) throw std::invalid_argument("set_value: shape of '" + v.name + "'");
  if (y.size() < num_scalars_) throw std::invalid_argument("set_value: vector too short");
  switch (v.kind) {
    case VarKind::Free:
    case VarKind::NonNegative:
      for (int i = 0; i < v.rows; ++i) {
        for (int j = 0; j < v.cols; ++j) y[v.offset + i * v.cols + j] = m(i, j);
      }
      break;
    case VarKind::Symmetric: {
      int idx = v.offset;
      for (int i = 0; i < v.rows; ++i) {
        for (int j = i; j < v.cols; ++j) y[idx++] = 0.5 * (m(i, j) + m(j, i));
      }
      break;
    }
    case VarKind::Diagonal:
      for (int i = 0; i < v.rows; ++i) y[v.offset + i] = m(i, i);
      break;
  }
}

MatrixXd ConicProgram::value(VarHandle v, const VectorXd& y) const { return expr(v).evaluate(y); }

double ConicProgram::objective_value(const VectorXd& y) const {
  switch (sense_) {
    case ObjectiveSense::Feasibility:
      return 0.0;
    case ObjectiveSense::Minimize:
    case ObjectiveSense::Maximize:
      return objective_.evaluate(y)(0, 0);
    case ObjectiveSense::MaximizeLogDet: {
      double s = 0.0;
      for (int idx : logdet_->diagonal) s += std::log(y[idx]);
      return s;
    }
  }
  return 0.0;
}

double ConicProgram::max_violation(const VectorXd& y) const {
  double worst = 0.0;
  for (const Variable& v : variables_) {
    if (v.kind == VarKind::Diagonal || v.kind == VarKind::NonNegative) {
      for (int i = 0; i < v.size; ++i) worst = std::max(worst, v.lower - y[v.offset + i]);
    }
  }
  for (const Constraint& c : constraints_) {
    const MatrixXd val = c.expr.evaluate(y);
    switch (c.kind) {
      case ConstraintKind::Psd: {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (val + val.transpose()),
                                                   Eigen::EigenvaluesOnly);
        worst = std::max(worst, c.margin - es.eigenvalues().minCoeff());
        break;
      }
      case ConstraintKind::NonNegative:
        worst = std::max(worst, c.margin - val.minCoeff());
        break;
      case ConstraintKind::Equality:
        worst = std::max(worst, val.cwiseAbs().maxCoeff());
        break;
    }
  }
  return worst;
}

namespace {

const char* kind_tag(VarKind k) {
  switch (k) {
    case VarKind::Free: return "free";
    case VarKind::Symmetric: return "sym";
    case VarKind::Diagonal: return "diag";
    case VarKind::NonNegative: return "nonneg";
  }
  return "?";
}

const char* cone_tag(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Psd: return "PSD";
    case ConstraintKind::NonNegative: return "LIN";
    case ConstraintKind::Equality: return "EQ";
  }
  return "?";
}

}  // namespace

std::string ConicProgram::dump() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "variables " << variables_.size() << " scalars " << num_scalars_ << '\n';
  for (const Variable& v : variables_) {
    os << "var " << v.name << ' ' << kind_tag(v.kind) << ' ' << v.rows << 'x' << v.cols
       << " offset " << v.offset << " size " << v.size;
    if (v.kind == VarKind::Diagonal || v.kind == VarKind::NonNegative) os << " lower " << v.lower;
    os << '\n';
  }
  os << "constraints " << constraints_.size() << '\n';
  for (const Constraint& c : constraints_) {
    os << cone_tag(c.kind) << ' ' << c.label << ' ' << c.expr.rows() << 'x' << c.expr.cols()
       << " margin " << c.margin;
    const MatrixXd& f0 = c.expr.constant();
    for (Index i = 0; i < f0.rows(); ++i) {
      for (Index j = 0; j < f0.cols(); ++j) {
        if (f0(i, j) != 0.0) os << " (" << i << ',' << j << ",c," << f0(i, j) << ')';
      }
    }
    for (const auto& [index, coef] : c.expr.terms()) {
      for (Index i = 0; i < coef.rows(); ++i) {
        for (Index j = 0; j < coef.cols(); ++j) {
          if (coef(i, j) != 0.0) os << " (" << i << ',' << j << ',' << index << ',' << coef(i, j) << ')';
        }
      }
    }
    os << '\n';
  }
  return os.str();
}

LogDetReduction reduce_logdet(ConicProgram& program, const AffineExpr& symmetric) {
  const Index n = symmetric.rows();
  if (n < 1 || symmetric.cols() != n) throw std::invalid_argument("reduce_logdet: expects square n >= 1");
  const AffineExpr e = symmetric.is_symmetric() ? symmetric : symmetric.symmetrized();

  LogDetReduction r;
  r.dim = static_cast<int>(n);
  const int nt = static_cast<int>(n * (n + 1) / 2);
  r.factor = program.free_var("logdet_T", nt, 1);
  const int base = program.variable(r.factor).offset;

  // T lower-triangular, packed column by column
  AffineExpr t(n, n);
  AffineExpr d(n, n);
  int idx = base;
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      MatrixXd c = MatrixXd::Zero(n, n);
      c(i, j) = 1.0;
      t.add_term(idx, c);
      if (i == j) {
        d.add_term(idx, c);
        r.diagonal.push_back(idx);
      }
      ++idx;
    }
  }
  SymmetricBlockBuilder coupling({n, n});
  coupling.set(0, 0, e);
  coupling.set(1, 0, t.transpose());
  coupling.set(1, 1, d);
  program.add_psd("logdet_coupling", coupling.build());

  std::vector<AffineExpr> level;
  for (int k : r.diagonal) {
    AffineExpr leaf(1, 1);
    leaf.add_term(k, MatrixXd::Ones(1, 1));
    level.push_back(std::move(leaf));
  }
  std::size_t width = 1;
  while (width < level.size()) width *= 2;
  while (level.size() < width) level.emplace_back(MatrixXd::Ones(1, 1));

  int layer = 0;
  while (level.size() > 1) {
    const VarHandle s = program.free_var("logdet_gm" + std::to_string(layer), static_cast<int>(level.size() / 2), 1);
    std::vector<AffineExpr> next;
    for (std::size_t p = 0; p < level.size() / 2; ++p) {
      const AffineExpr sp = program.entry(s, static_cast<int>(p), 0);
      SymmetricBlockBuilder hyp({1, 1});
      hyp.set(0, 0, level[2 * p]);
      hyp.set(1, 0, sp);
      hyp.set(1, 1, level[2 * p + 1]);
      program.add_psd("logdet_chain", hyp.build());
      next.push_back(sp);
    }
    level = std::move(next);
    ++layer;
  }
  r.root = level.front();
  return r;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

}  // namespace pdrci::conic
