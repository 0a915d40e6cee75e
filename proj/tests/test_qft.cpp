#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle_util.hpp"
#include "qtthl/analytic.hpp"
#include "qtthl/qft.hpp"

using namespace qtthl;

namespace {

constexpr double kPi = std::numbers::pi;
const Format kFormats[] = {Format::X1X2_Y1Y2, Format::X1X2_Y2Y1, Format::X2X1_Y1Y2, Format::X1Y1};

// Entry (output bits, input bits) of the unitary d-dimensional DFT under a layout pair.
cplx dft_entry(const QttLayout& phys, std::span<const int> out_bits, std::span<const int> in_bits) {
  const auto m = decode(phys.with_space(Space::Fourier), out_bits);
  const auto j = decode(phys, in_bits);
  const double N = static_cast<double>(phys.grid_size());
  double arg = 0;
  for (size_t i = 0; i < m.size(); ++i) arg += static_cast<double>(m[i]) * static_cast<double>(j[i]) / N;
  return std::polar(std::pow(N, -0.5 * phys.d), -2 * kPi * arg);
}

RMat<cplx> dense_of(const QftOperator& q) {
  RMat<cplx> m = to_dense(q.factors[0]);
  for (size_t f = 1; f < q.factors.size(); ++f) m = to_dense(q.factors[f]) * m;
  return m;
}

}  // namespace

TEST(Qft1d, SingleBitIsHadamard) {
  for (auto method : {QftMethod::Dense, QftMethod::Circuit}) {
    auto m = build_qft_1d(1, 1e-12, method);
    EXPECT_EQ(m.max_rank(), 1);
    auto d = to_dense(m);
    const double h = 1 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(d(0, 0) - h), 0, 1e-15);
    EXPECT_NEAR(std::abs(d(0, 1) - h), 0, 1e-15);
    EXPECT_NEAR(std::abs(d(1, 0) - h), 0, 1e-15);
    EXPECT_NEAR(std::abs(d(1, 1) + h), 0, 1e-15);
  }
}

TEST(Qft1d, DeltaToConstant) {
  const int L = 6;
  auto m = build_qft_1d(L, 1e-12);
  std::vector<std::vector<cplx>> f(L, std::vector<cplx>{1.0, 0.0});
  auto y = oracle::dense(qtthl::apply(m, TensorTrain<cplx>::product(f)));
  for (auto v : y) EXPECT_NEAR(std::abs(v - cplx(0.125)), 0, 1e-12);
}

TEST(Qft1d, MatchesDenseDftBothRoutes) {
  for (int L : {4, 8, 10}) {
    QttLayout lay{1, L, Format::X1Y1, Space::Physical, Arity::Scalar};
    std::vector<Index> dims(static_cast<size_t>(L), 2);
    for (auto method : {QftMethod::Dense, QftMethod::Circuit}) {
      auto d = to_dense(build_qft_1d(L, 1e-12, method));
      double worst = 0;
      const Index N = Index(1) << L;
      for (Index r = 0; r < N; ++r)
        for (Index c = 0; c < N; ++c) {
          auto rb = oracle::digits(r, dims), cb = oracle::digits(c, dims);
          worst = std::max(worst, std::abs(d(r, c) - dft_entry(lay, rb, cb)));
        }
      EXPECT_LE(worst, 1e-10) << "L=" << L;
    }
  }
}

TEST(Qft1d, RankBoundedIndependentOfL) {
  for (int L : {8, 12, 16, 20, 24, 32, 40}) {
    auto m = build_qft_1d(L, 1e-12, QftMethod::Circuit);
    EXPECT_LE(m.max_rank(), 16) << "L=" << L;
  }
}

TEST(Qft, AssembledMatchesDenseAllFormats) {
  for (Format f : kFormats) {
    QttLayout lay{2, 5, f, Space::Physical, Arity::Scalar};
    auto q = assemble_qft(lay, 1e-13);
    if (f == Format::X1Y1) EXPECT_EQ(q.factors.size(), 2u);
    auto d = dense_of(q);
    std::vector<Index> dims(10, 2);
    double worst = 0;
    for (Index r = 0; r < 1024; ++r)
      for (Index c = 0; c < 1024; ++c) {
        auto rb = oracle::digits(r, dims), cb = oracle::digits(c, dims);
        worst = std::max(worst, std::abs(d(r, c) - dft_entry(lay, rb, cb)));
      }
    EXPECT_LE(worst, 1e-9) << to_string(f);
  }
}

TEST(Qft, ConstantToDeltaAndRealSymmetry) {
  std::mt19937_64 g(1);
  for (Format f : kFormats) {
    QttLayout lay{2, 7, f, Space::Physical, Arity::Scalar};
    auto q = assemble_qft(lay, 1e-12);
    auto one = forward(to_complex(constant_field(lay, 3.0)), lay, q);
    auto fl = lay.with_space(Space::Fourier);
    EXPECT_NEAR(std::abs(evaluate(one, fl, std::vector<Index>{0, 0})[0] - cplx(3.0 * 128)), 0, 1e-9);
    EXPECT_NEAR(norm(one), 3.0 * 128, 1e-9);
    auto real_in = add(hadamard(cos_field(lay, 0, 6 * kPi, 0.4), sin_field(lay, 1, 2 * kPi)), cos_field(lay, 1, 14 * kPi));
    auto dims = lay.site_dims();
    real_in = add(real_in, random_train<double>(std::span<const Index>(dims), 3, 5));
    auto hat = forward(to_complex(real_in), lay, q);
    for (int k = 0; k < 100; ++k) {
      Index m1 = static_cast<Index>(g() % 127) - 63, m2 = static_cast<Index>(g() % 127) - 63;
      auto a = evaluate(hat, fl, std::vector<Index>{m1, m2})[0];
      auto b = evaluate(hat, fl, std::vector<Index>{-m1, -m2})[0];
      EXPECT_NEAR(std::abs(a - std::conj(b)), 0, 1e-10);
    }
  }
}

TEST(Qft, UnitarityAndParseval) {
  for (Format f : {Format::X1Y1, Format::X1X2_Y2Y1}) {
    QttLayout lay{2, 8, f, Space::Physical, Arity::Scalar};
    auto fw = assemble_qft(lay, 1e-13);
    auto iv = assemble_qft(lay, 1e-13, true);
    auto dims = lay.site_dims();
    auto x = random_train<cplx>(std::span<const Index>(dims), 5, 17);
    auto hat = forward(x, lay, fw);
    EXPECT_NEAR(norm(hat), 1.0, 1e-10);
    auto back = inverse(hat, lay.with_space(Space::Fourier), iv);
    EXPECT_LE(distance(back, x), 1e-10);
    EXPECT_THROW(inverse(hat, lay, iv), ShapeError);
  }
}

TEST(Qft, ParsevalAtLargeLevel) {
  QttLayout lay{2, 20, Format::X1Y1, Space::Physical, Arity::Scalar};
  auto fw = assemble_qft(lay, 1e-12);
  auto x = to_complex(add(hadamard(cos_field(lay, 0, 2 * kPi * 37, 0.1), cos_field(lay, 1, 2 * kPi * 5)),
                          sin_field(lay, 1, 2 * kPi * 1000)));
  auto hat = forward(x, lay, fw);
  EXPECT_NEAR(norm(hat) / norm(x), 1.0, 1e-10);
  auto fl = lay.with_space(Space::Fourier);
  // sin(2 pi 1000 y) contributes -i/2 * 2^L at m = (0, 1000).
  auto v = evaluate(hat, fl, std::vector<Index>{0, 1000})[0];
  EXPECT_NEAR(std::abs(v - cplx(0, -0.5 * std::ldexp(1.0, 20))), 0, 1e-6 * std::ldexp(1.0, 20));
}

TEST(Qft, SineHasTwoCoefficients) {
  const int L = 6;
  QttLayout lay{2, L, Format::X1X2_Y1Y2, Space::Physical, Arity::Scalar};
  auto q = assemble_qft(lay, 1e-13);
  auto hat = forward(to_complex(sin_field(lay, 0, 2 * kPi)), lay, q);
  auto fl = lay.with_space(Space::Fourier);
  std::vector<Index> dims(2 * L, 2);
  int nonzero = 0;
  for (Index flat = 0; flat < (Index(1) << (2 * L)); ++flat) {
    auto bits = oracle::digits(flat, dims);
    auto m = decode(fl, bits);
    const cplx v = hat.evaluate(bits);
    if (std::abs(v) > 1e-10) {
      ++nonzero;
      EXPECT_EQ(std::abs(m[0]), 1);
      EXPECT_EQ(m[1], 0);
      EXPECT_NEAR(std::abs(v), 32.0, 1e-10);
    }
  }
  EXPECT_EQ(nonzero, 2);
}

TEST(Qft, ValueSiteCommutes) {
  QttLayout lay{2, 5, Format::X1Y1, Space::Physical, Arity::Vector};
  auto sl = lay.with_arity(Arity::Scalar);
  auto a = to_complex(cos_field(sl, 0, 2 * kPi));
  auto b = to_complex(sin_field(sl, 1, 4 * kPi));
  auto v = stack_components<cplx>({a, b});
  auto qv = assemble_qft(lay, 1e-13);
  auto qs = assemble_qft(sl, 1e-13);
  auto hv = forward(v, lay, qv);
  auto fl = lay.with_space(Space::Fourier);
  EXPECT_LE(distance(component(hv, fl, 0), forward(a, sl, qs)), 1e-11);
  EXPECT_LE(distance(component(hv, fl, 1), forward(b, sl, qs)), 1e-11);
}
