#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pdrci::polya {

/// Exponent tuple beta = (beta_1, ..., beta_r) of a homogeneous monomial.
/// Entries are nonnegative; the degree is their sum.
using ExponentTuple = std::vector<int>;

/// Largest degree for which coefficients are computed. 12! fits comfortably in
/// 64 bits and every ratio below stays exact.
inline constexpr int kMaxDegree = 12;

int degree(std::span<const int> beta);

/// Number of r-tuples of nonnegative integers summing to d: (r+d-1)! / (d! (r-1)!).
std::int64_t tuple_count(int d, int r);

/// All r-tuples summing to d in lexicographic order (first entry slowest).
/// The q-th element (0-based here) is J_{q+1}(d).
std::vector<ExponentTuple> enumerate_exponents(int d, int r);

/// d! / (beta_1! ... beta_r!).
std::int64_t multinomial(std::span<const int> beta);

/// d! / (beta_1! ... (beta_i - a)! ... beta_r!) with d = |beta| - a, or 0 when
/// beta_i < a. Index i is 0-based.
std::int64_t modified_coeff_single(std::span<const int> beta, int i, int a);

/// Two-index variant: shifts beta_i by a and beta_j by b (i != j, 0-based).
std::int64_t modified_coeff_pair(std::span<const int> beta, int i, int j, int a, int b);

}  // namespace pdrci::polya
