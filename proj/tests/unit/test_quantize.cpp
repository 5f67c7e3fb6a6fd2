// Copyright 2026-present the streamlvq authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "streamlvq/errors.hpp"
#include "streamlvq/quantize.hpp"
#include "test_support.hpp"

namespace streamlvq {
namespace {

using testing::gaussian;
using testing::lattice;

std::vector<float> zeros(std::size_t d) { return std::vector<float>(d, 0.0f); }

TEST(Mean, SymmetricPairGivesZero) {
  const auto x = VectorDataset::from_rows({{1.5f, -2.0f, 3.0f}, {-1.5f, 2.0f, -3.0f}});
  for (const float v : compute_mean(x).values) EXPECT_EQ(v, 0.0f);
}

TEST(Mean, SingleVectorIsItself) {
  const auto x = VectorDataset::from_rows({{0.25f, 7.0f}});
  EXPECT_EQ(compute_mean(x).values, x.values);
}

TEST(Mean, SubsampleCloseToZeroForStandardNormal) {
  // A 1% sample has 100 rows, so each component has standard error 0.1.
  // Single draws are checked in aggregate (RMS over components) and the
  // seed-swept average component-wise.
  const auto x = gaussian(10000, 16, 1);
  std::vector<double> swept(16, 0.0);
  const int seeds = 8;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto m = compute_mean(x, 0.01, static_cast<std::uint64_t>(seed));
    EXPECT_EQ(m.provenance, MeanProvenance::subsample);
    double ss = 0;
    for (std::size_t j = 0; j < 16; ++j) {
      ss += m.values[j] * m.values[j];
      swept[j] += m.values[j] / seeds;
    }
    EXPECT_LT(std::sqrt(ss / 16), 0.2) << seed;
  }
  for (const double v : swept) EXPECT_LT(std::abs(v), 0.2);
  for (const float v : compute_mean(x).values) EXPECT_LT(std::abs(v), 0.05f);
}

TEST(Mean, FrozenLatticeMean) {
  // numpy float64 mean of lattice(64, 24), rounded to float
  const auto m = compute_mean(lattice(0, 64, 24));
  EXPECT_EQ(m.values[0], -0.12890625f);
  EXPECT_EQ(m.values[1], -0.080078125f);
  EXPECT_EQ(m.values[2], -0.03125f);
  EXPECT_EQ(m.values[3], 0.017578125f);
}

TEST(Mean, Errors) {
  EXPECT_THROW(compute_mean(VectorDataset(3)), ArgumentError);
  EXPECT_THROW(compute_mean(gaussian(10, 2, 0), 0.01), ArgumentError);
}

TEST(Bounds, Basics) {
  const std::vector<float> x{1, 2, 3, 4};
  const std::vector<float> mu{1, 1, 1, 1};
  const auto b = vector_bounds(x, mu);
  EXPECT_EQ(b.lower, 0.0);
  EXPECT_EQ(b.upper, 3.0);
  const auto z = vector_bounds(mu, mu);
  EXPECT_EQ(z.lower, 0.0);
  EXPECT_EQ(z.upper, 0.0);
  const std::vector<float> bad{1, std::numeric_limits<float>::infinity(), 0, 0};
  EXPECT_THROW(vector_bounds(bad, mu), ArgumentError);
}

TEST(Bounds, MatchesLinearScan) {
  const auto x = gaussian(200, 33, 4);
  const auto mu = gaussian(1, 33, 5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t j = 0; j < 33; ++j) {
      const double r = static_cast<double>(x.row(i)[j]) - mu.row(0)[j];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const auto b = vector_bounds(x.row(i), mu.row(0));
    EXPECT_EQ(b.lower, lo);
    EXPECT_EQ(b.upper, hi);
  }
}

TEST(ScalarQuantize, Endpoints) {
  for (const double bits : {1.0, 2.0, 4.0, 8.0}) {
    const auto lo = scalar_quantize(-1.25, bits, -1.25, 3.5);
    EXPECT_EQ(lo.code, 0u);
    EXPECT_EQ(lo.value, -1.25);
    const auto hi = scalar_quantize(3.5, bits, -1.25, 3.5);
    EXPECT_EQ(hi.code, static_cast<std::uint32_t>(std::exp2(bits) - 1));
    EXPECT_DOUBLE_EQ(hi.value, 3.5);
  }
}

TEST(ScalarQuantize, TwoBitHandValues) {
  const auto a = scalar_quantize(1.4, 2, 0, 3);
  EXPECT_EQ(a.code, 1u);
  EXPECT_EQ(a.value, 1.0);
  const auto b = scalar_quantize(2.6, 2, 0, 3);
  EXPECT_EQ(b.code, 3u);
  EXPECT_EQ(b.value, 3.0);
}

TEST(ScalarQuantize, DegenerateAndErrors) {
  const auto d = scalar_quantize(2.0, 4, 2.0, 2.0);
  EXPECT_EQ(d.code, 0u);
  EXPECT_EQ(d.value, 2.0);
  EXPECT_THROW(scalar_quantize(std::nan(""), 4, 0, 1), ArgumentError);
}

TEST(ScalarQuantize, ClampsAtTopCode) {
  // Slightly above the upper bound still lands in the last cell.
  const auto c = scalar_quantize(std::nextafter(3.0, 4.0), 2, 0, 3);
  EXPECT_EQ(c.code, 3u);
}

TEST(Encode, MeanEncodesToZero) {
  const std::vector<float> mu{0.5f, -1.0f, 2.0f};
  const auto e = lvq_encode(mu, mu, {4, 8});
  EXPECT_EQ(e.lower, 0.0f);
  EXPECT_EQ(e.step, 0.0f);
  for (const auto c : e.primary) EXPECT_EQ(c, 0u);
  EXPECT_EQ(lvq_decode(e, DecodeLevel::one, mu), mu);
  EXPECT_EQ(lvq_decode(e, DecodeLevel::two, mu), mu);
}

TEST(Encode, RampIsExact) {
  const std::vector<float> mu{1, 1, 1, 1};
  const std::vector<float> x{1, 2, 3, 4};
  const auto e = lvq_encode(x, mu, {2, 8});
  EXPECT_EQ(e.primary, (std::vector<std::uint16_t>{0, 1, 2, 3}));
  EXPECT_EQ(e.step, 1.0f);
  EXPECT_EQ(lvq_decode(e, DecodeLevel::one, mu), x);
  const auto two = lvq_decode(e, DecodeLevel::two, mu);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(two[j], x[j], 0.5 / 255 + 1e-6);
}

TEST(Decode, TwoLevelWithoutResidualIsStateError) {
  const std::vector<float> x{1, 2, 3};
  const auto e = lvq_encode(x, zeros(3), {4, 0});
  EXPECT_THROW(lvq_decode(e, DecodeLevel::two, zeros(3)), StateError);
}

TEST(Encode, DimensionMismatch) {
  const std::vector<float> x{1, 2, 3};
  EXPECT_THROW(lvq_encode(x, zeros(2), {4, 0}), ArgumentError);
}

TEST(Encode, CodesStayInRange) {
  const auto x = gaussian(300, 40, 8, 5.0f);
  const auto mu = compute_mean(x);
  for (const unsigned b1 : {1u, 2u, 3u, 4u, 8u}) {
    for (const unsigned b2 : {0u, 2u, 8u}) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto e = lvq_encode(x.row(i), mu.values, {double(b1), double(b2)});
        for (const auto c : e.primary) EXPECT_LT(c, 1u << b1);
        for (const auto c : e.residual) EXPECT_LT(c, 1u << b2);
        EXPECT_GE(e.step, 0.0f);
      }
    }
  }
}

TEST(Encode, ShiftInvariance) {
  // Everything here is a multiple of 1/8 with small magnitude, so x + c and
  // mu + c are exact in float and the residuals match bit for bit.
  const auto x = lattice(0, 30, 16);
  const auto m = lattice(40, 1, 16);
  const std::vector<float> mu(m.values.begin(), m.values.end());
  std::vector<float> c(16);
  for (std::size_t j = 0; j < 16; ++j) c[j] = 0.5f * static_cast<float>(j) - 2.0f;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<float> xs(16), ms(16);
    for (std::size_t j = 0; j < 16; ++j) {
      xs[j] = x.row(i)[j] + c[j];
      ms[j] = mu[j] + c[j];
    }
    EXPECT_EQ(lvq_encode(x.row(i), mu, {4, 0}).primary, lvq_encode(xs, ms, {4, 0}).primary) << i;
  }
}

TEST(Epsilon1, ExactGridGivesZero) {
  VectorDataset x(4);
  x.append(std::vector<float>{0, 1, 2, 3}, 0);
  x.append(std::vector<float>{3, 2, 1, 0}, 1);
  x.append(std::vector<float>{0, 3, 0, 3}, 2);
  EXPECT_EQ(epsilon1(x, zeros(4), 2).total, 0.0);
}

// Reference values from tests/oracles/frozen_values.py (real arithmetic). The
// stored bounds are rounded outward to float, hence the relative tolerance.
TEST(Epsilon1, FrozenLatticeValues) {
  const auto x = lattice(0, 64, 24);
  const auto mu = compute_mean(x).values;
  const std::vector<std::pair<double, double>> expected{{2, 1729.7865456475151}, {3, 294.72199724158463},
                                                        {4, 72.41093811035154},  {4.5, 35.972938539109066},
                                                        {5, 17.93851202211568},  {8, 0.2479675420272026}};
  for (const auto& [bits, value] : expected) {
    const auto e = epsilon1(x, mu, bits);
    EXPECT_NEAR(e.total, value, 1e-5 * value) << "B1=" << bits;
    EXPECT_DOUBLE_EQ(e.per_vector, e.total / 64.0);
  }
}

TEST(Epsilon1, NonIncreasingInBits) {
  const auto x = gaussian(2000, 32, 2);
  const auto mu = compute_mean(x).values;
  double prev = std::numeric_limits<double>::infinity();
  for (double b = 2; b <= 8; b += 0.5) {
    const double e = epsilon1(x, mu, b).total;
    EXPECT_LT(e, prev) << b;
    prev = e;
  }
}

TEST(Fractional, IntegerBitsReproduceStoragePath) {
  const auto x = gaussian(200, 19, 6);
  const auto mu = compute_mean(x).values;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto f = fractional_encode(x.row(i), 4, 8, mu);
    const auto e = lvq_encode(x.row(i), mu, {4, 8});
    const auto one = decode_centered(e, DecodeLevel::one);
    const auto two = decode_centered(e, DecodeLevel::two);
    for (std::size_t j = 0; j < 19; ++j) {
      EXPECT_EQ(f.first_level[j], one[j]);
      EXPECT_EQ(f.two_level[j], two[j]);
    }
  }
}

TEST(Fractional, SixteenBitsIsNearlyLossless) {
  const auto x = gaussian(500, 16, 12);
  const auto mu = compute_mean(x).values;
  EXPECT_LT(epsilon1(x, mu, 16).total, 1e-4 * epsilon1(x, mu, 4).total);
}

// Error bounds over many random and adversarial vectors.
class ErrorBound : public ::testing::TestWithParam<std::tuple<std::size_t, unsigned, unsigned>> {};

TEST_P(ErrorBound, FirstAndSecondLevel) {
  const auto [d, b1, b2] = GetParam();
  auto x = gaussian(600, d, d * 100 + b1 * 10 + b2, 3.0f);
  std::vector<float> row(d);
  std::fill(row.begin(), row.end(), 4.0f);  // constant
  x.append(row, 1000001);
  std::fill(row.begin(), row.end(), 0.0f);
  row[d / 2] = 1e4f;  // single spike
  x.append(row, 1000002);
  for (std::size_t j = 0; j < d; ++j) row[j] = j % 2 ? -1.0f : 1.0f;  // alternating sign
  x.append(row, 1000003);
  const auto mu = compute_mean(x).values;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto e = lvq_encode(x.row(i), mu, {double(b1), double(b2)});
    const auto one = decode_centered(e, DecodeLevel::one);
    const auto b = vector_bounds(x.row(i), mu);
    const double slack = 4 * std::numeric_limits<float>::epsilon() * (b.upper - b.lower + 1e-30);
    const double step = e.step;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = static_cast<double>(x.row(i)[j]) - mu[j];
      ASSERT_LE(std::abs(r - one[j]), step / 2 + slack) << "i=" << i << " j=" << j;
    }
    if (b2 == 0) continue;
    const auto two = decode_centered(e, DecodeLevel::two);
    const double bound2 = step / (2 * (std::exp2(b2) - 1));
    for (std::size_t j = 0; j < d; ++j) {
      const double r = static_cast<double>(x.row(i)[j]) - mu[j];
      ASSERT_LE(std::abs(r - two[j]), bound2 + slack) << "i=" << i << " j=" << j;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, ErrorBound,
                         ::testing::Combine(::testing::Values(8, 32, 512), ::testing::Values(2u, 4u, 8u),
                                            ::testing::Values(0u, 2u, 8u)));

}  // namespace
}  // namespace streamlvq
