#include "pdrci/polya.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numeric>

using namespace pdrci::polya;

namespace {

std::int64_t fact(int n) { return n <= 1 ? 1 : n * fact(n - 1); }

// brute force over all r^d index words; each word contributes one to its exponent tuple
std::map<ExponentTuple, std::int64_t> expand_power(int d, int r) {
  std::map<ExponentTuple, std::int64_t> out;
  std::vector<int> word(static_cast<std::size_t>(d), 0);
  while (true) {
    ExponentTuple b(static_cast<std::size_t>(r), 0);
    for (int w : word) ++b[static_cast<std::size_t>(w)];
    ++out[b];
    int pos = 0;
    while (pos < d && ++word[static_cast<std::size_t>(pos)] == r) word[static_cast<std::size_t>(pos++)] = 0;
    if (pos == d) break;
  }
  return out;
}

}  // namespace

TEST(Polya, EnumerateThreeThree) {
  auto e = enumerate_exponents(3, 3);
  ASSERT_EQ(e.size(), 10u);
  EXPECT_EQ(e[0], (ExponentTuple{0, 0, 3}));
  EXPECT_EQ(e[1], (ExponentTuple{0, 1, 2}));
  EXPECT_EQ(e[2], (ExponentTuple{0, 2, 1}));
}

TEST(Polya, EnumerateDegreeZero) {
  auto e = enumerate_exponents(0, 3);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0], (ExponentTuple{0, 0, 0}));
  EXPECT_EQ(tuple_count(0, 3), 1);
}

TEST(Polya, EnumerateTwoTwo) {
  auto e = enumerate_exponents(2, 2);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], (ExponentTuple{0, 2}));
  EXPECT_EQ(e[1], (ExponentTuple{1, 1}));
  EXPECT_EQ(e[2], (ExponentTuple{2, 0}));
}

TEST(Polya, CountMatchesFormulaAndOrder) {
  for (int r = 1; r <= 5; ++r) {
    for (int d = 0; d <= 6; ++d) {
      auto e = enumerate_exponents(d, r);
      EXPECT_EQ(static_cast<std::int64_t>(e.size()), fact(r + d - 1) / (fact(d) * fact(r - 1)));
      EXPECT_EQ(tuple_count(d, r), static_cast<std::int64_t>(e.size()));
      EXPECT_TRUE(std::is_sorted(e.begin(), e.end()));
      for (const auto& b : e) EXPECT_EQ(degree(b), d);
    }
  }
}

TEST(Polya, Multinomial) {
  EXPECT_EQ(multinomial(std::vector<int>{0, 1, 2}), 3);
  EXPECT_EQ(multinomial(std::vector<int>{5}), 1);
  EXPECT_EQ(multinomial(std::vector<int>{1, 1, 1}), 6);
}

TEST(Polya, MultinomialSumsToPower) {
  for (int r = 1; r <= 4; ++r) {
    for (int d = 0; d <= 6; ++d) {
      std::int64_t s = 0;
      for (const auto& b : enumerate_exponents(d, r)) s += multinomial(b);
      std::int64_t p = 1;
      for (int i = 0; i < d; ++i) p *= r;
      EXPECT_EQ(s, p) << "d=" << d << " r=" << r;
    }
  }
}

TEST(Polya, MultinomialMatchesExpansion) {
  for (int r = 1; r <= 3; ++r) {
    for (int d = 0; d <= 4; ++d) {
      auto ex = expand_power(d, r);
      for (const auto& b : enumerate_exponents(d, r)) EXPECT_EQ(multinomial(b), ex[b]);
    }
  }
}

// numerator is (|beta| - a)!, the Polya degree
TEST(Polya, ModifiedSingle) {
  EXPECT_EQ(modified_coeff_single(std::vector<int>{2, 1}, 0, 2), 1);  // 1!/(0! 1!)
  EXPECT_EQ(modified_coeff_single(std::vector<int>{0, 3}, 0, 2), 0);
  EXPECT_EQ(modified_coeff_single(std::vector<int>{1, 1, 1}, 1, 1), 2);  // 2!/(1! 0! 1!)
  EXPECT_EQ(modified_coeff_single(std::vector<int>{3, 2}, 1, 2), 1);
  EXPECT_EQ(modified_coeff_single(std::vector<int>{2, 2}, 0, 2), 1);
  EXPECT_EQ(modified_coeff_single(std::vector<int>{1, 1, 2}, 2, 2), 2);
}

TEST(Polya, ModifiedPair) {
  EXPECT_EQ(modified_coeff_pair(std::vector<int>{1, 1}, 0, 1, 1, 1), 1);  // 0!/(0! 0!)
  EXPECT_EQ(modified_coeff_pair(std::vector<int>{2, 0}, 0, 1, 1, 1), 0);
  EXPECT_EQ(modified_coeff_pair(std::vector<int>{1, 1, 1}, 0, 2, 1, 1), 1);  // 1!/(0! 1! 0!)
  EXPECT_EQ(modified_coeff_pair(std::vector<int>{2, 1, 1}, 0, 1, 1, 1), 2);
}

// coefficient of xi^beta in (sum xi)^d * xi_k xi_l, by direct expansion
TEST(Polya, ModifiedCoefficientsMatchExpansion) {
  for (int r = 1; r <= 3; ++r) {
    for (int d = 0; d <= 3; ++d) {
      auto ex = expand_power(d, r);
      for (const auto& beta : enumerate_exponents(d + 2, r)) {
        for (int k = 0; k < r; ++k) {
          ExponentTuple b = beta;
          std::int64_t want = 0;
          if (b[static_cast<std::size_t>(k)] >= 2) {
            b[static_cast<std::size_t>(k)] -= 2;
            want = ex[b];
          }
          EXPECT_EQ(modified_coeff_single(beta, k, 2), want);
          for (int l = k + 1; l < r; ++l) {
            ExponentTuple c = beta;
            std::int64_t want2 = 0;
            if (c[static_cast<std::size_t>(k)] >= 1 && c[static_cast<std::size_t>(l)] >= 1) {
              --c[static_cast<std::size_t>(k)];
              --c[static_cast<std::size_t>(l)];
              want2 = ex[c];
            }
            EXPECT_EQ(modified_coeff_pair(beta, k, l, 1, 1), want2);
          }
        }
      }
    }
  }
}
