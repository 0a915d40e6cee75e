#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "oracle_util.hpp"
#include "qtthl/analytic.hpp"
#include "qtthl/io.hpp"
#include "qtthl/layout.hpp"

using namespace qtthl;

namespace {

const Format kFormats[] = {Format::X1X2_Y1Y2, Format::X1X2_Y2Y1, Format::X2X1_Y1Y2, Format::X1Y1};

QttLayout lay2(int L, Format f, Space s = Space::Physical, Arity a = Arity::Scalar) { return {2, L, f, s, a}; }

Index bit_reverse(Index v, int L) {
  Index r = 0;
  for (int b = 0; b < L; ++b) r |= ((v >> b) & 1) << (L - 1 - b);
  return r;
}

std::vector<Index> random_point(const QttLayout& lay, std::mt19937_64& g) {
  std::vector<Index> p(static_cast<size_t>(lay.d));
  for (auto& v : p) v = static_cast<Index>(g() % static_cast<std::uint64_t>(lay.grid_size()));
  return p;
}

}  // namespace

TEST(Encode, BitPatternExamples) {
  const std::vector<Index> pt{grid_index(0.5, 2), grid_index(0.25, 2)};
  EXPECT_EQ(encode(lay2(2, Format::X1Y1), pt), (std::vector<int>{1, 0, 0, 1}));
  EXPECT_EQ(encode(lay2(2, Format::X1X2_Y2Y1), pt), (std::vector<int>{1, 0, 1, 0}));
  const int L = 5;
  auto f = lay2(L, Format::X1X2_Y1Y2, Space::Fourier);
  auto bits = encode(f, std::vector<Index>{-(Index(1) << (L - 1)), 0});
  // k^x_1 is the bit of weight 2^(L-1), stored at the site of physical level L.
  EXPECT_EQ(bits[f.site_of(0, L)], 1);
  int ones = 0;
  for (int b : bits) ones += b;
  EXPECT_EQ(ones, 1);
  EXPECT_THROW(grid_index(0.3, 2), ShapeError);
  EXPECT_THROW(encode(lay2(2, Format::X1Y1), std::vector<Index>{4, 0}), ShapeError);
}

TEST(Encode, ExhaustiveBijection) {
  for (int d : {2, 3})
    for (Format f : kFormats)
      for (Space s : {Space::Physical, Space::Fourier})
        for (int L = 1; L <= 4; ++L) {
          QttLayout lay{d, L, f, s, Arity::Vector};
          const Index total = Index(1) << (d * L);
          std::vector<bool> seen(static_cast<size_t>(total), false);
          std::vector<Index> dims(static_cast<size_t>(d * L), 2);
          for (Index flat = 0; flat < total; ++flat) {
            auto bits = oracle::digits(flat, dims);
            bits.insert(bits.begin(), d - 1);
            Index comp = -1;
            auto c = decode(lay, bits, &comp);
            EXPECT_EQ(comp, d - 1);
            EXPECT_EQ(encode(lay, c, comp), bits);
            Index key = 0;
            for (auto v : c) key = key * lay.grid_size() + (v < 0 ? v + lay.grid_size() : v);
            EXPECT_FALSE(seen[static_cast<size_t>(key)]);
            seen[static_cast<size_t>(key)] = true;
          }
        }
}

TEST(Encode, FourierIsBitReversedPhysical) {
  const int L = 6;
  for (Format f : kFormats) {
    auto p = lay2(L, f);
    auto q = lay2(L, f, Space::Fourier);
    for (Index mx = -32; mx < 32; mx += 5)
      for (Index my = -32; my < 32; my += 7) {
        const Index ux = mx < 0 ? mx + 64 : mx, uy = my < 0 ? my + 64 : my;
        EXPECT_EQ(encode(q, std::vector<Index>{mx, my}),
                  encode(p, std::vector<Index>{bit_reverse(ux, L), bit_reverse(uy, L)}));
      }
  }
}

TEST(Encode, ThreeDimensionalMirroredFormats) {
  // (x1..xL, yL..y1, z1..zL) and (xL..x1, y1..yL, zL..z1)
  EXPECT_EQ(bit_position(3, 4, Format::X1X2_Y2Y1, 1, 1), 7);
  EXPECT_EQ(bit_position(3, 4, Format::X1X2_Y2Y1, 2, 1), 8);
  EXPECT_EQ(bit_position(3, 4, Format::X2X1_Y1Y2, 0, 1), 3);
  EXPECT_EQ(bit_position(3, 4, Format::X2X1_Y1Y2, 1, 1), 4);
  EXPECT_EQ(bit_position(3, 4, Format::X2X1_Y1Y2, 2, 1), 11);
}

TEST(Evaluate, ExpTrain) {
  const int L = 8;
  auto lay = QttLayout{1, L, Format::X1Y1, Space::Physical, Arity::Scalar};
  auto e = exp_1d<double>(L, 1.0);
  auto v = evaluate(e, lay, std::vector<Index>{grid_index(0.75, L)});
  EXPECT_NEAR(v[0], std::exp(0.75), 1e-12);
  auto z = TensorTrain<double>::zeros(std::span<const Index>(lay.site_dims()));
  EXPECT_EQ(evaluate(z, lay, std::vector<Index>{3})[0], 0.0);
}

TEST(Evaluate, RandomTrainMatchesDense) {
  auto lay = lay2(4, Format::X1X2_Y2Y1);
  auto dims = lay.site_dims();
  auto t = random_train<double>(std::span<const Index>(dims), 5, 8);
  auto dense = oracle::dense(t);
  double worst = 0;
  for (Index flat = 0; flat < 256; ++flat) {
    auto bits = oracle::digits(flat, dims);
    auto c = decode(lay, bits);
    worst = std::max(worst, std::abs(evaluate(t, lay, c)[0] - dense[static_cast<size_t>(flat)]));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Analytic, TrigFieldsAndEmbedding) {
  std::mt19937_64 g(3);
  for (Format f : kFormats) {
    auto lay = lay2(9, f);
    auto c = cos_field(lay, 1, 8 * std::numbers::pi, 0.3);
    auto s = sin_field(lay, 0, 4 * std::numbers::pi);
    EXPECT_LE(c.max_rank(), 2);
    for (int k = 0; k < 40; ++k) {
      auto p = random_point(lay, g);
      const double x = std::ldexp(double(p[0]), -9), y = std::ldexp(double(p[1]), -9);
      EXPECT_NEAR(evaluate(c, lay, p)[0], std::cos(8 * std::numbers::pi * y + 0.3), 1e-13);
      EXPECT_NEAR(evaluate(s, lay, p)[0], std::sin(4 * std::numbers::pi * x), 1e-13);
    }
  }
}

TEST(Permute, SameFormatIsIdentity) {
  auto lay = lay2(5, Format::X1Y1);
  auto dims = lay.site_dims();
  auto t = random_train<double>(std::span<const Index>(dims), 4, 2);
  auto p = permute_format(t, lay, Format::X1Y1, 1e-12);
  for (size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.core(i).data, p.core(i).data);
}

TEST(Permute, RoundTripPreservesValues) {
  std::mt19937_64 g(11);
  auto lay = lay2(7, Format::X1Y1);
  auto f = add(hadamard(cos_field(lay, 0, 6 * std::numbers::pi), sin_field(lay, 1, 2 * std::numbers::pi)),
               cos_field(lay, 1, 10 * std::numbers::pi, 1.0));
  auto there = permute_format(f, lay, Format::X1X2_Y1Y2, 1e-12);
  auto lay_t = lay;
  lay_t.format = Format::X1X2_Y1Y2;
  auto back = permute_format(there, lay_t, Format::X1Y1, 1e-12);
  double worst = 0, worst_mid = 0;
  for (int k = 0; k < 100; ++k) {
    auto p = random_point(lay, g);
    const double ref = evaluate(f, lay, p)[0];
    worst = std::max(worst, std::abs(evaluate(back, lay, p)[0] - ref));
    worst_mid = std::max(worst_mid, std::abs(evaluate(there, lay_t, p)[0] - ref));
  }
  EXPECT_LE(worst, 1e-10);
  EXPECT_LE(worst_mid, 1e-10);
}

TEST(Permute, SeparableRankBound) {
  auto lay = lay2(6, Format::X1X2_Y1Y2);
  auto f = hadamard(cos_field(lay, 0, 2 * std::numbers::pi, 0.2), cos_field(lay, 1, 4 * std::numbers::pi, 0.7));
  for (Format t : kFormats) {
    auto p = permute_format(f, lay, t, 1e-12);
    EXPECT_LE(p.max_rank(), 4) << to_string(t);
  }
}

TEST(Periodize, IdentityConstantAndPeriodicity) {
  std::mt19937_64 g(5);
  auto cell = lay2(4, Format::X1Y1);
  auto dims = cell.site_dims();
  auto t = random_train<double>(std::span<const Index>(dims), 3, 4);
  auto same = periodize(t, cell, 0);
  EXPECT_EQ(oracle::dense(same), oracle::dense(t));
  auto one = periodize(constant_field(cell, 2.5), cell, 2);
  auto big = cell.with_level(6);
  for (int k = 0; k < 10; ++k) EXPECT_DOUBLE_EQ(evaluate(one, big, random_point(big, g))[0], 2.5);
  for (Format f : kFormats) {
    auto c = cell;
    c.format = f;
    auto gl = c.with_level(6);
    auto p = periodize(t, c, 2);
    for (int k = 0; k < 50; ++k) {
      auto pt = random_point(gl, g);
      auto shifted = pt;
      shifted[0] = (pt[0] + 16) % 64;
      const double v = evaluate(p, gl, pt)[0];
      EXPECT_DOUBLE_EQ(v, evaluate(p, gl, shifted)[0]);
      std::vector<Index> local{pt[0] % 16, pt[1] % 16};
      EXPECT_DOUBLE_EQ(v, evaluate(t, c, local)[0]);
    }
  }
}

TEST(Components, StackAndExtract) {
  auto lay = lay2(4, Format::X1Y1);
  auto a = cos_field(lay, 0, 2 * std::numbers::pi);
  auto b = sin_field(lay, 1, 2 * std::numbers::pi);
  auto v = stack_components<double>({a, b});
  auto vl = lay.with_arity(Arity::Vector);
  EXPECT_EQ(v.site_dims(), vl.site_dims());
  EXPECT_LT(oracle::rel_diff(oracle::dense(component(v, vl, 0)), oracle::dense(a)), 1e-15);
  EXPECT_LT(oracle::rel_diff(oracle::dense(component(v, vl, 1)), oracle::dense(b)), 1e-15);
  auto val = evaluate(v, vl, std::vector<Index>{4, 4});
  EXPECT_NEAR(val[0], 0.0, 1e-15);
  EXPECT_NEAR(val[1], 1.0, 1e-15);
}

TEST(Io, ExactRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "qtthl_io_test";
  std::filesystem::create_directories(dir);
  auto lay = lay2(4, Format::X1X2_Y2Y1, Space::Fourier, Arity::Matrix);
  auto dims = lay.site_dims();
  auto t = random_train<cplx>(std::span<const Index>(dims), 6, 9);
  save_train((dir / "t.qtt").string(), t, lay);
  std::optional<QttLayout> back_lay;
  auto back = load_train<cplx>((dir / "t.qtt").string(), &back_lay);
  ASSERT_TRUE(back_lay.has_value());
  EXPECT_EQ(*back_lay, lay);
  for (size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.core(i).data, back.core(i).data);
  EXPECT_THROW(load_train<double>((dir / "t.qtt").string()), IoError);
  auto op = Mpo<double>::identity(std::span<const Index>(dims));
  save_mpo((dir / "m.qtt").string(), op);
  auto op2 = load_mpo<double>((dir / "m.qtt").string());
  EXPECT_EQ(op2.ranks(), op.ranks());
  std::filesystem::remove_all(dir);
}
