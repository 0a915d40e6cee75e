#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle_util.hpp"
#include "qtthl/fit.hpp"
#include "qtthl/mpo.hpp"
#include "qtthl/tensor_train.hpp"

using namespace qtthl;
using oracle::rel_diff;

namespace {

std::vector<Index> bits(size_t k) { return std::vector<Index>(k, 2); }

TensorTrain<double> exp_train(int L) {
  std::vector<std::vector<double>> f;
  for (int l = 1; l <= L; ++l) f.push_back({1.0, std::exp(std::ldexp(1.0, -l))});
  return TensorTrain<double>::product(f);
}

double dyadic(std::span<const int> b) {
  double x = 0;
  for (size_t l = 0; l < b.size(); ++l) x += b[l] * std::ldexp(1.0, -static_cast<int>(l + 1));
  return x;
}

template <class T>
TensorTrain<T> random_tt(const std::vector<Index>& dims, Index r, std::uint64_t seed) {
  return random_train<T>(std::span<const Index>(dims), r, seed);
}

}  // namespace

TEST(Round, ExpTrainStaysRankOne) {
  auto t = exp_train(10);
  auto r = round(t, 1e-12);
  for (auto k : r.ranks()) EXPECT_EQ(k, 1);
  std::mt19937_64 g(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<int> b(10);
    for (auto& v : b) v = static_cast<int>(g() % 2);
    EXPECT_NEAR(r.evaluate(b), std::exp(dyadic(b)), 1e-12 * std::exp(1.0));
  }
}

TEST(Round, ZeroToleranceIsIdentity) {
  auto dims = bits(8);
  auto t = random_tt<cplx>(dims, 5, 3);
  auto r = round(t, 0.0);
  EXPECT_LT(distance(t, r), 1e-13);
}

TEST(Round, DenseRoundTrip) {
  std::mt19937_64 g(9);
  std::vector<double> v(256);
  for (auto& x : v) x = oracle::rnd<double>(g);
  auto dims = bits(8);
  auto t = from_dense<double>(std::span<const double>(v), std::span<const Index>(dims));
  auto r = round(t, 1e-10);
  EXPECT_LT(rel_diff(oracle::dense(r), v), 1e-9);
}

TEST(Round, ErrorBoundAndIdempotence) {
  auto dims = bits(11);
  auto a = random_tt<double>(dims, 4, 5);
  auto b = random_tt<double>(dims, 6, 6);
  auto s = add(a, scale(b, 1e-6));
  TruncationInfo info;
  auto r = round(s, 1e-3, kUnboundedRank, &info);
  const double err = rel_diff(oracle::dense(r), oracle::dense(s));
  EXPECT_LE(err, 1e-3 + info.relative() + 1e-14);
  auto r2 = round(r, 1e-3);
  EXPECT_EQ(r.ranks(), r2.ranks());
  EXPECT_LT(distance(r, r2), 1e-13 * norm(r));
}

TEST(Round, RankCapIsHardAndReportsDiscard) {
  auto dims = bits(10);
  auto a = random_tt<double>(dims, 8, 11);
  TruncationInfo info;
  auto r = round(a, 0.0, 3, &info);
  EXPECT_LE(r.max_rank(), 3);
  EXPECT_GT(info.discarded, 0.0);
  const double err = oracle::l2(oracle::dense(axpby(1.0, a, -1.0, r)));
  EXPECT_NEAR(err, info.discarded, 1e-8 + 0.5 * info.discarded);
}

TEST(Add, SelfCancellation) {
  auto dims = bits(9);
  auto a = random_tt<cplx>(dims, 4, 2);
  auto z = round(add(a, scale(a, cplx(-1))), 1e-12);
  EXPECT_LT(norm(z), 1e-13);
}

TEST(Add, ExpPlusOne) {
  const int L = 10;
  auto e = exp_train(L);
  auto one = TensorTrain<double>::constant(std::span<const Index>(bits(L)), 1.0);
  auto s = add(e, one);
  for (size_t i = 1; i + 1 < s.ranks().size(); ++i) EXPECT_EQ(s.ranks()[i], 2);
  std::mt19937_64 g(4);
  for (int i = 0; i < 100; ++i) {
    std::vector<int> b(L);
    for (auto& v : b) v = static_cast<int>(g() % 2);
    EXPECT_NEAR(s.evaluate(b), std::exp(dyadic(b)) + 1.0, 1e-12);
  }
}

TEST(Add, MatchesDense) {
  auto dims = std::vector<Index>{3, 2, 2, 2, 2, 2, 2, 2};
  auto a = random_tt<cplx>(dims, 5, 21);
  auto b = random_tt<cplx>(dims, 3, 22);
  auto da = oracle::dense(a), db = oracle::dense(b);
  auto ds = oracle::dense(axpby(cplx(2, 1), a, cplx(-0.5), b));
  for (size_t i = 0; i < da.size(); ++i) da[i] = cplx(2, 1) * da[i] - 0.5 * db[i];
  EXPECT_LT(rel_diff(ds, da), 1e-12);
}

TEST(Apply, IdentityIsExact) {
  auto dims = bits(7);
  auto x = random_tt<double>(dims, 4, 1);
  auto id = Mpo<double>::identity(std::span<const Index>(dims));
  EXPECT_EQ(oracle::dense(qtthl::apply(id, x)), oracle::dense(x));
}

TEST(Apply, DenseMatrixLifted) {
  std::mt19937_64 g(12);
  const Index N = 64;
  RMat<cplx> m(N, N);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < N; ++j) m(i, j) = oracle::rnd<cplx>(g);
  auto dims = bits(6);
  auto op = from_dense(m, std::span<const Index>(dims), std::span<const Index>(dims));
  EXPECT_LT((to_dense(op) - m).norm() / m.norm(), 1e-12);
  auto x = random_tt<cplx>(dims, 3, 13);
  auto dx = oracle::dense(x);
  Eigen::Map<Vec<cplx>> vx(dx.data(), N);
  Vec<cplx> ref = m * vx;
  auto y = oracle::dense(qtthl::apply(op, x));
  EXPECT_LT(rel_diff(y, std::vector<cplx>(ref.data(), ref.data() + N)), 1e-10);
}

TEST(Apply, ComposeAndAdjointMatchDense) {
  std::mt19937_64 g(14);
  auto dims = std::vector<Index>{2, 3, 2, 2};
  const Index N = 24;
  RMat<cplx> a(N, N), b(N, N);
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < N; ++j) {
      a(i, j) = oracle::rnd<cplx>(g);
      b(i, j) = oracle::rnd<cplx>(g);
    }
  auto ma = from_dense(a, std::span<const Index>(dims), std::span<const Index>(dims));
  auto mb = from_dense(b, std::span<const Index>(dims), std::span<const Index>(dims));
  EXPECT_LT((to_dense(compose(ma, mb)) - a * b).norm() / (a * b).norm(), 1e-11);
  EXPECT_LT((to_dense(adjoint(ma)) - a.adjoint()).norm() / a.norm(), 1e-12);
  EXPECT_LT((to_dense(add(ma, mb)) - (a + b)).norm() / (a + b).norm(), 1e-12);
  EXPECT_LT((to_dense(round(add(ma, mb), 1e-13)) - (a + b)).norm() / (a + b).norm(), 1e-11);
}

TEST(Inner, NormalizedRandom) {
  auto dims = bits(12);
  auto a = random_tt<cplx>(dims, 6, 5);
  EXPECT_NEAR(std::abs(inner(a, a) - cplx(1)), 0.0, 1e-12);
  EXPECT_NEAR(norm(a), 1.0, 1e-13);
}

TEST(Inner, RankOneProductsAndDense) {
  const int L = 6;
  auto a = exp_train(L);
  std::vector<std::vector<double>> f;
  for (int l = 1; l <= L; ++l) f.push_back({1.0, std::exp(-2.0 * std::ldexp(1.0, -l))});
  auto b = TensorTrain<double>::product(f);
  double expected = 1.0;
  for (int l = 1; l <= L; ++l) expected *= 1.0 + std::exp(std::ldexp(1.0, -l)) * std::exp(-2.0 * std::ldexp(1.0, -l));
  auto da = oracle::dense(a), db = oracle::dense(b);
  double dense_ip = 0;
  for (size_t i = 0; i < da.size(); ++i) dense_ip += da[i] * db[i];
  EXPECT_NEAR(inner(a, b), expected, 1e-12 * expected);
  EXPECT_NEAR(inner(a, b), dense_ip, 1e-12 * expected);
}

TEST(Inner, ConjugateLinearFirstArgument) {
  auto dims = std::vector<Index>{2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  auto a = random_tt<cplx>(dims, 3, 31);
  auto b = random_tt<cplx>(dims, 4, 32);
  auto da = oracle::dense(a), db = oracle::dense(b);
  cplx ref = 0;
  for (size_t i = 0; i < da.size(); ++i) ref += std::conj(da[i]) * db[i];
  EXPECT_LT(std::abs(inner(a, b) - ref), 1e-12);
  EXPECT_LT(std::abs(inner(scale(a, cplx(0, 2)), b) - cplx(0, -2) * ref), 1e-12);
}

TEST(RandomTrain, DeterministicClippedNormalized) {
  auto dims = bits(10);
  std::vector<Index> req(11, 20);
  req.front() = req.back() = 1;
  auto a = random_train<cplx>(std::span<const Index>(dims), std::span<const Index>(req), 99);
  auto b = random_train<cplx>(std::span<const Index>(dims), std::span<const Index>(req), 99);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.core(i).data, b.core(i).data);
  const auto r = a.ranks();
  const std::vector<Index> expect{1, 2, 4, 8, 16, 20, 16, 8, 4, 2, 1};
  EXPECT_EQ(r, expect);
  EXPECT_NEAR(norm(a), 1.0, 1e-13);
  std::vector<Index> bad{1, 2, 0, 1};
  EXPECT_THROW(random_train<double>(std::span<const Index>(bits(3)), std::span<const Index>(bad), 1), ShapeError);
}

TEST(Canonical, OrthogonalityAroundCenter) {
  auto dims = std::vector<Index>{2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  auto a = random_tt<cplx>(dims, 7, 17);
  auto before = oracle::dense(a);
  for (size_t c : {size_t(0), size_t(4), size_t(9)}) {
    auto t = a;
    canonicalize(t, c);
    EXPECT_LT(orthogonality_defect(t, c), 1e-12);
    EXPECT_LT(rel_diff(oracle::dense(t), before), 1e-13);
  }
}

TEST(Hadamard, MatchesDense) {
  auto dims = bits(8);
  auto a = random_tt<double>(dims, 3, 3);
  auto b = random_tt<double>(dims, 4, 4);
  auto h = oracle::dense(hadamard(a, b));
  auto da = oracle::dense(a), db = oracle::dense(b);
  for (size_t i = 0; i < da.size(); ++i) da[i] *= db[i];
  EXPECT_LT(rel_diff(h, da), 1e-12);
  EXPECT_LT(rel_diff(oracle::dense(hadamard_round(a, b, 1e-13)), da), 1e-11);
}

TEST(Fit, MatchesExactApplyAndRound) {
  auto dims = std::vector<Index>{2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  auto x = random_tt<cplx>(dims, 6, 41);
  auto w = round(as_train(Mpo<cplx>::identity(std::span<const Index>(std::vector<Index>(12, 2)))), 0.0);
  std::mt19937_64 g(42);
  auto field = random_tt<cplx>(dims, 5, 43);
  auto d = diag_of(field);
  auto exact = oracle::dense(qtthl::apply(d, x));
  FitOptions o;
  o.tol = 1e-13;
  FitInfo info;
  std::vector<FitTerm<cplx>> terms{{&d, &x, cplx(1)}, {nullptr, &x, cplx(0.5, -1)}};
  auto y = fit_sum(terms, o, &info);
  auto dx = oracle::dense(x);
  for (size_t i = 0; i < exact.size(); ++i) exact[i] += cplx(0.5, -1) * dx[i];
  EXPECT_LT(rel_diff(oracle::dense(y), exact), 1e-10);
}

TEST(Fit, CancellingDifferenceIsAccurate) {
  auto dims = bits(14);
  auto a = random_tt<double>(dims, 5, 51);
  auto b = random_tt<double>(dims, 3, 52);
  auto c = add(a, scale(b, 1e-7));
  std::vector<FitTerm<double>> terms{{nullptr, &c, 1.0}, {nullptr, &a, -1.0}};
  FitOptions o;
  o.tol = 1e-12;
  auto y = fit_sum(terms, o);
  EXPECT_LT(distance(y, scale(b, 1e-7)) / 1e-7, 1e-6);
}

TEST(RealPart, SplitsComplexTrain) {
  auto dims = std::vector<Index>{2, 3, 2, 2, 2};
  auto z = random_tt<cplx>(dims, 4, 61);
  auto dz = oracle::dense(z);
  auto re = oracle::dense(real_part(z));
  auto im = oracle::dense(imag_part(z));
  for (size_t i = 0; i < dz.size(); ++i) {
    EXPECT_NEAR(re[i], dz[i].real(), 1e-13);
    EXPECT_NEAR(im[i], dz[i].imag(), 1e-13);
  }
}

TEST(SiteHelpers, InsertAndDropSites) {
  auto dims = bits(4);
  auto a = random_tt<double>(dims, 3, 71);
  auto ins = insert_constant_sites(a, 2, 2);
  EXPECT_EQ(ins.size(), 6u);
  std::vector<int> i4{1, 0, 1, 1}, i6{1, 0, 0, 1, 1, 1};
  EXPECT_NEAR(ins.evaluate(i6), a.evaluate(i4), 1e-14);
  auto p = prepend_unit_site(a);
  EXPECT_EQ(p.size(), 5u);
  auto q = drop_unit_site(p);
  EXPECT_LT(rel_diff(oracle::dense(q), oracle::dense(a)), 1e-15);
}
