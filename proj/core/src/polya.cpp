#include "pdrci/polya.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace pdrci::polya {
namespace {

std::int64_t factorial(int n) {
  if (n < 0 || n > 20) {
    throw std::overflow_error("factorial argument out of range: " + std::to_string(n));
  }
  std::int64_t f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

void check_degree(int d) {
  if (d < 0) throw std::invalid_argument("negative degree");
  if (d > kMaxDegree) {
    throw std::overflow_error("degree " + std::to_string(d) + " exceeds supported maximum " +
                              std::to_string(kMaxDegree));
  }
}

// Exact d! / prod(beta_k!) after validating every entry.
std::int64_t ratio(std::span<const int> beta) {
  int d = 0;
  for (int b : beta) {
    if (b < 0) return 0;
    d += b;
  }
  check_degree(d);
  std::int64_t value = factorial(d);
  for (int b : beta) value /= factorial(b);
  return value;
}

void enumerate_into(int remaining, std::size_t pos, ExponentTuple& current,
                    std::vector<ExponentTuple>& out) {
  if (pos + 1 == current.size()) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int v = 0; v <= remaining; ++v) {
    current[pos] = v;
    enumerate_into(remaining - v, pos + 1, current, out);
  }
}

}  // namespace

int degree(std::span<const int> beta) { return std::accumulate(beta.begin(), beta.end(), 0); }

std::int64_t tuple_count(int d, int r) {
  if (d < 0 || r < 1) throw std::invalid_argument("tuple_count requires d >= 0 and r >= 1");
  // C(r+d-1, d) by the multiplicative formula; every partial product is an integer.
  std::int64_t c = 1;
  for (int k = 1; k <= d; ++k) {
    c = c * (r - 1 + k) / k;
  }
  return c;
}

std::vector<ExponentTuple> enumerate_exponents(int d, int r) {
  if (d < 0 || r < 1) throw std::invalid_argument("enumerate_exponents requires d >= 0 and r >= 1");
  std::vector<ExponentTuple> out;
  out.reserve(static_cast<std::size_t>(tuple_count(d, r)));
  ExponentTuple current(static_cast<std::size_t>(r), 0);
  enumerate_into(d, 0, current, out);
  return out;
}

std::int64_t multinomial(std::span<const int> beta) { return ratio(beta); }

std::int64_t modified_coeff_single(std::span<const int> beta, int i, int a) {
  if (i < 0 || static_cast<std::size_t>(i) >= beta.size()) throw std::out_of_range("index i");
  if (a < 0) throw std::invalid_argument("shift must be nonnegative");
  ExponentTuple shifted(beta.begin(), beta.end());
  shifted[static_cast<std::size_t>(i)] -= a;
  return ratio(shifted);
}

std::int64_t modified_coeff_pair(std::span<const int> beta, int i, int j, int a, int b) {
  if (i == j) throw std::invalid_argument("modified_coeff_pair requires i != j");
  if (i < 0 || static_cast<std::size_t>(i) >= beta.size()) throw std::out_of_range("index i");
  if (j < 0 || static_cast<std::size_t>(j) >= beta.size()) throw std::out_of_range("index j");
  if (a < 0 || b < 0) throw std::invalid_argument("shift must be nonnegative");
  ExponentTuple shifted(beta.begin(), beta.end());
  shifted[static_cast<std::size_t>(i)] -= a;
  shifted[static_cast<std::size_t>(j)] -= b;
  return ratio(shifted);
}

}  // namespace pdrci::polya
