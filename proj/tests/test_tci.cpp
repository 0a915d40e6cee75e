#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "oracle_util.hpp"
#include "qtthl/analytic.hpp"
#include "qtthl/tci.hpp"

using namespace qtthl;

namespace {

double dyadic(std::span<const int> b) {
  double x = 0;
  for (size_t l = 0; l < b.size(); ++l) x += b[l] * std::ldexp(1.0, -static_cast<int>(l + 1));
  return x;
}

SiteFunction<double> projector_00(const QttLayout& fl) {
  return [fl](std::span<const int> bits) {
    auto m = decode(fl, bits);
    const double k0 = static_cast<double>(m[0]), k1 = static_cast<double>(m[1]);
    const double n = k0 * k0 + k1 * k1;
    return n == 0 ? 1.0 : 1.0 - k0 * k0 / n;
  };
}

}  // namespace

TEST(Tci, ExpIsRankOne) {
  const int L = 12;
  SiteFunction<double> f = [](std::span<const int> b) { return std::exp(dyadic(b)); };
  std::vector<Index> dims(L, 2);
  TciReport rep;
  auto tt = build_from_function(f, std::span<const Index>(dims), TciOptions{}, &rep);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(tt.max_rank(), 1);
  std::mt19937_64 g(2);
  for (int i = 0; i < 1000; ++i) {
    std::vector<int> b(L);
    for (auto& v : b) v = static_cast<int>(g() % 2);
    EXPECT_NEAR(tt.evaluate(b), f(b), 1e-12 * f(b));
  }
}

TEST(Tci, ConstantAndKnownRanks) {
  std::vector<Index> dims(10, 2);
  SiteFunction<double> c = [](std::span<const int>) { return 4.25; };
  auto tc = build_from_function(c, std::span<const Index>(dims), TciOptions{});
  EXPECT_EQ(tc.max_rank(), 1);
  EXPECT_DOUBLE_EQ(tc.evaluate(std::vector<int>(10, 1)), 4.25);
  SiteFunction<double> s = [](std::span<const int> b) { return std::sin(6 * std::numbers::pi * dyadic(b) + 0.2); };
  auto ts = build_from_function(s, std::span<const Index>(dims), TciOptions{});
  EXPECT_EQ(ts.max_rank(), 2);
  EXPECT_LE(monte_carlo_error(ts, s, 1024, 1), 1e-12);
  SiteFunction<cplx> e = [](std::span<const int> b) { return std::polar(1.0, 2 * std::numbers::pi * 5 * dyadic(b)); };
  auto te = build_from_function(e, std::span<const Index>(dims), TciOptions{});
  EXPECT_EQ(te.max_rank(), 1);
}

TEST(Tci, ZeroFunctionAndNonFinite) {
  std::vector<Index> dims(6, 2);
  SiteFunction<double> z = [](std::span<const int>) { return 0.0; };
  auto tz = build_from_function(z, std::span<const Index>(dims), TciOptions{});
  EXPECT_EQ(norm(tz), 0.0);
  EXPECT_THROW(monte_carlo_error(tz, z, 10, 1), std::domain_error);
  SiteFunction<double> bad = [](std::span<const int> b) {
    return b[0] == 1 ? std::numeric_limits<double>::infinity() : 1.0;
  };
  EXPECT_THROW(build_from_function(bad, std::span<const Index>(dims), TciOptions{}), std::domain_error);
}

TEST(MonteCarlo, KnownPerturbation) {
  const int L = 14;
  std::vector<Index> dims(L, 2);
  SiteFunction<double> f = [](std::span<const int> b) { return std::exp(dyadic(b)); };
  auto exact = exp_1d<double>(L, 1.0);
  EXPECT_LE(monte_carlo_error(exact, f, 1000, 3), 1e-12);
  // Rank-one perturbation with entrywise relative size 1e-3 of an oscillating sign pattern.
  auto osc = embed_coordinate(cos_1d(L, std::numbers::pi * 16384), QttLayout{1, L, Format::X1Y1}, 0);
  auto pert = add(exact, scale(hadamard(exact, osc), 1e-3));
  const double est = monte_carlo_error(pert, f, 1000, 5);
  EXPECT_NEAR(est, 1e-3, 2e-4);
}

TEST(MonteCarlo, FullGridEqualsDense) {
  const int L = 4;
  std::vector<Index> dims(2 * L, 2);
  QttLayout fl{2, L, Format::X1Y1, Space::Fourier, Arity::Scalar};
  auto f = projector_00(fl);
  auto tt = random_train<double>(std::span<const Index>(dims), 4, 6);
  std::vector<double> ref;
  for (Index flat = 0; flat < 256; ++flat) ref.push_back(f(oracle::digits(flat, dims)));
  const double dense_err = oracle::rel_diff(oracle::dense(tt), ref);
  EXPECT_NEAR(monte_carlo_error(tt, f, 256, 1), dense_err, 1e-14);
}

TEST(Tci, ProjectorSymbolSmallLevel) {
  QttLayout fl{2, 8, Format::X1Y1, Space::Fourier, Arity::Scalar};
  auto f = projector_00(fl);
  TciOptions o;
  o.tol = 1e-10;
  TciReport rep;
  auto tt = build_from_function(f, fl, o, &rep);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(monte_carlo_error(tt, f, 1 << 16, 1), 1e-8);
  EXPECT_LE(tt.max_rank(), 120);
}

TEST(Tci, ErrorNonIncreasingInRank) {
  QttLayout fl{2, 10, Format::X1Y1, Space::Fourier, Arity::Scalar};
  auto f = projector_00(fl);
  double prev = 1e300;
  for (Index r : {5, 10, 20, 40}) {
    TciOptions o;
    o.tol = 1e-14;
    o.max_rank = r;
    o.max_sweeps = 6;
    auto tt = build_from_function(f, fl, o);
    const double e = monte_carlo_error(tt, f, 2000, 9);
    EXPECT_LE(e, 1.5 * prev) << "rank " << r;
    prev = std::min(prev, e);
  }
}
