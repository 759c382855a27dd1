#include "pdrci/conic.hpp"

#include <stdexcept>
#include <string>

namespace pdrci::conic {
namespace {

void require_same_shape(const AffineExpr& a, const AffineExpr& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

}  // namespace

AffineExpr::AffineExpr(Index rows, Index cols) : constant_(MatrixXd::Zero(rows, cols)) {}

AffineExpr::AffineExpr(MatrixXd constant) : constant_(std::move(constant)) {}

void AffineExpr::add_term(int index, const MatrixXd& coef) {
  if (coef.rows() != rows() || coef.cols() != cols()) {
    throw std::invalid_argument("add_term: coefficient shape mismatch");
  }
  auto it = terms_.find(index);
  if (it == terms_.end()) {
    terms_.emplace(index, coef);
  } else {
    it->second += coef;
  }
}

void AffineExpr::add_constant(const MatrixXd& c) {
  if (c.rows() != rows() || c.cols() != cols()) {
    throw std::invalid_argument("add_constant: shape mismatch");
  }
  constant_ += c;
}

MatrixXd AffineExpr::evaluate(const VectorXd& y) const {
  MatrixXd out = constant_;
  for (const auto& [index, coef] : terms_) {
    if (index >= y.size()) throw std::out_of_range("evaluate: scalar index out of range");
    out += y[index] * coef;
  }
  return out;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr out(constant_.transpose());
  for (const auto& [index, coef] : terms_) out.terms_.emplace(index, coef.transpose());
  return out;
}

AffineExpr AffineExpr::block(Index row, Index col, Index nrows, Index ncols) const {
  AffineExpr out(constant_.block(row, col, nrows, ncols));
  for (const auto& [index, coef] : terms_) {
    MatrixXd sub = coef.block(row, col, nrows, ncols);
    if (!sub.isZero(0.0)) out.terms_.emplace(index, std::move(sub));
  }
  return out;
}

bool AffineExpr::is_symmetric() const {
  if (rows() != cols()) return false;
  if (constant_ != constant_.transpose()) return false;
  for (const auto& [index, coef] : terms_) {
    if (coef != coef.transpose()) return false;
  }
  return true;
}

AffineExpr AffineExpr::symmetrized() const {
  if (rows() != cols()) throw std::invalid_argument("symmetrized: expression is not square");
  AffineExpr out(MatrixXd(0.5 * (constant_ + constant_.transpose())));
  for (const auto& [index, coef] : terms_) {
    out.terms_.emplace(index, 0.5 * (coef + coef.transpose()));
  }
  return out;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  require_same_shape(*this, other, "operator+");
  constant_ += other.constant_;
  for (const auto& [index, coef] : other.terms_) add_term(index, coef);
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  require_same_shape(*this, other, "operator-");
  constant_ -= other.constant_;
  for (const auto& [index, coef] : other.terms_) add_term(index, -coef);
  return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  for (auto& [index, coef] : terms_) coef *= s;
  return *this;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

AffineExpr operator*(const MatrixXd& left, const AffineExpr& e) {
  if (left.cols() != e.rows()) throw std::invalid_argument("matrix * expr: inner dimension mismatch");
  AffineExpr out(MatrixXd(left * e.constant()));
  for (const auto& [index, coef] : e.terms()) out.add_term(index, left * coef);
  return out;
}

AffineExpr operator*(const AffineExpr& e, const MatrixXd& right) {
  if (e.cols() != right.rows()) throw std::invalid_argument("expr * matrix: inner dimension mismatch");
  AffineExpr out(MatrixXd(e.constant() * right));
  for (const auto& [index, coef] : e.terms()) out.add_term(index, coef * right);
  return out;
}

AffineExpr he(const AffineExpr& e) {
  if (e.rows() != e.cols()) throw std::invalid_argument("he: expression is not square");
  return e + e.transpose();
}

AffineExpr diag_product(const MatrixXd& left, const AffineExpr& d, const MatrixXd& right) {
  if (d.cols() != 1 || d.rows() != left.cols() || d.rows() != right.rows()) {
    throw std::invalid_argument("diag_product: dimension mismatch");
  }
  auto weighted = [&](const VectorXd& w) -> MatrixXd { return left * w.asDiagonal() * right; };
  AffineExpr out(weighted(d.constant().col(0)));
  for (const auto& [index, coef] : d.terms()) out.add_term(index, weighted(coef.col(0)));
  return out;
}

AffineExpr scale(const AffineExpr& s, const MatrixXd& m) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("scale: expects a 1x1 expression");
  AffineExpr out(MatrixXd(s.constant()(0, 0) * m));
  for (const auto& [index, coef] : s.terms()) out.add_term(index, coef(0, 0) * m);
  return out;
}

AffineExpr sum_entries(const AffineExpr& e) {
  AffineExpr out(MatrixXd::Constant(1, 1, e.constant().sum()));
  for (const auto& [index, coef] : e.terms()) out.add_term(index, MatrixXd::Constant(1, 1, coef.sum()));
  return out;
}

SymmetricBlockBuilder::SymmetricBlockBuilder(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
  Index offset = 0;
  for (Index s : sizes_) {
    offsets_.push_back(offset);
    offset += s;
  }
  offsets_.push_back(offset);
}

void SymmetricBlockBuilder::set(std::size_t row, std::size_t col, const AffineExpr& e) {
  if (row < col) throw std::invalid_argument("SymmetricBlockBuilder::set expects a lower block");
  if (row >= sizes_.size()) throw std::out_of_range("SymmetricBlockBuilder::set: block index");
  if (e.rows() != sizes_[row] || e.cols() != sizes_[col]) {
    throw std::invalid_argument("SymmetricBlockBuilder::set: block (" + std::to_string(row) + "," +
                                std::to_string(col) + ") has wrong shape");
  }
  blocks_.insert_or_assign({row, col}, e);
}

AffineExpr SymmetricBlockBuilder::build() const {
  const Index n = offsets_.back();
  MatrixXd constant = MatrixXd::Zero(n, n);
  std::map<int, MatrixXd> terms;
  auto place = [&](const MatrixXd& src, Index r0, Index c0, MatrixXd& dst) {
    dst.block(r0, c0, src.rows(), src.cols()) = src;
  };
  for (const auto& [rc, e] : blocks_) {
    const auto [r, c] = rc;
    const Index r0 = offsets_[r];
    const Index c0 = offsets_[c];
    place(e.constant(), r0, c0, constant);
    if (r != c) place(e.constant().transpose(), c0, r0, constant);
    for (const auto& [index, coef] : e.terms()) {
      auto [it, inserted] = terms.try_emplace(index, MatrixXd::Zero(n, n));
      place(coef, r0, c0, it->second);
      if (r != c) place(coef.transpose(), c0, r0, it->second);
    }
  }
  AffineExpr out(std::move(constant));
  for (auto& [index, coef] : terms) out.add_term(index, coef);
  return out;
}

}  // namespace pdrci::conic
