#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sharpbfgs/linalg.hpp"

using namespace sharpbfgs;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(SpdMatrix, SymmetrizesInput) {
  Matrix m(2, 2);
  m << 2.0, 1.0, 0.0, 2.0;
  SpdMatrix s(m);
  EXPECT_DOUBLE_EQ(s.entries()(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(s.entries()(1, 0), 0.5);
}

TEST(SpdMatrix, RejectsIndefiniteAndNonSquare) {
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0, 1.0;
  try {
    SpdMatrix bad(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
  EXPECT_THROW(SpdMatrix(Matrix::Zero(2, 3)), Error);
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(SpdMatrix{nan}, Error);
}

TEST(SpdMatrix, RejectsPivotBelowTolerance) {
  // Rank-one plus a pivot at 1e-16 relative: positive in exact arithmetic,
  // below the 1e-14 * max-diagonal floor.
  Matrix m = diag2(1.0, 1e-16);
  EXPECT_THROW(SpdMatrix{m}, Error);
  EXPECT_NO_THROW(SpdMatrix(diag2(1.0, 1e-12)));
}

TEST(SpdMatrix, FactorReconstructs) {
  std::mt19937_64 eng(3);
  const Matrix a = oracle::random_spd(7, eng);
  SpdMatrix s(a);
  const Matrix l = s.lower_factor();
  EXPECT_LE(oracle::frob(oracle::mul(l, Matrix(l.transpose())) - a), 1e-10 * oracle::frob(a));
}

TEST(Cholesky, IdentityAndDiagonal) {
  const UpperTriangular r = cholesky(SpdMatrix::identity(3));
  EXPECT_LE((r.entries() - Matrix::Identity(3, 3)).norm(), 1e-15);
  const UpperTriangular rd = cholesky(SpdMatrix(diag2(4.0, 9.0)));
  EXPECT_NEAR(rd.entries()(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(rd.entries()(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(rd.entries()(0, 1), 0.0);
}

TEST(Cholesky, InverseFactorIsUpperTriangular) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 eng(seed);
    const Index d = 5 + static_cast<Index>(seed % 6);
    const Matrix m = oracle::random_spd(d, eng);
    const UpperTriangular r = cholesky(SpdMatrix(m));
    for (Index i = 0; i < d; ++i) {
      EXPECT_GT(r.entries()(i, i), 0.0);
      for (Index j = 0; j < i; ++j) {
        EXPECT_EQ(r.entries()(i, j), 0.0);
      }
    }
    const Matrix rtr = oracle::mul(Matrix(r.entries().transpose()), r.entries());
    const Matrix prod = oracle::mul(m, rtr);
    EXPECT_LE(oracle::frob(prod - Matrix::Identity(d, d)), 1e-8 * std::sqrt(static_cast<double>(d)));
  }
}

TEST(UpperTriangular, RejectsNonPositiveDiagonal) {
  Matrix m = Matrix::Identity(2, 2);
  m(1, 1) = 0.0;
  EXPECT_THROW(UpperTriangular{m}, Error);
}

TEST(Solve, Examples) {
  Vector b(3);
  b << 1.0, -2.0, 3.0;
  EXPECT_LE((solve(SpdMatrix::identity(3), b) - b).norm(), 0.0);
  Vector b2(2);
  b2 << 2.0, 4.0;
  const Vector x = solve(SpdMatrix(diag2(2.0, 4.0)), b2);
  EXPECT_DOUBLE_EQ(x(0), 1.0);
  EXPECT_DOUBLE_EQ(x(1), 1.0);
  EXPECT_THROW(solve(SpdMatrix::identity(3), Vector::Ones(2)), Error);
}

TEST(Solve, ResidualRandom) {
  std::mt19937_64 eng(11);
  const Matrix m = oracle::random_spd(6, eng);
  const Vector b = Vector::Ones(6);
  const Vector x = solve(SpdMatrix(m), b);
  EXPECT_LE((oracle::mul(m, x) - b).norm(), 1e-9 * b.norm());
}

TEST(Solve, ResidualIllConditioned) {
  // Condition number 1e6 at d = 512, built from a Householder reflector so
  // the spectrum is known exactly.
  const Index d = 512;
  std::mt19937_64 eng(5);
  Vector v = oracle::gaussian(d, eng);
  v /= v.norm();
  Vector diag(d);
  for (Index i = 0; i < d; ++i) {
    diag(i) = std::pow(1e6, static_cast<double>(i) / static_cast<double>(d - 1));
  }
  const Matrix q = Matrix::Identity(d, d) - 2.0 * v * v.transpose();
  const Matrix m = q * diag.asDiagonal() * q;
  const Vector b = oracle::gaussian(d, eng);
  const Vector x = solve(SpdMatrix(m), b);
  EXPECT_LE((m * x - b).norm(), 1e-9 * b.norm());
}

TEST(QuadForm, Examples) {
  EXPECT_DOUBLE_EQ(quad_form(SpdMatrix::identity(3), Vector::Unit(3, 0)), 1.0);
  EXPECT_DOUBLE_EQ(quad_form(SpdMatrix(diag2(3.0, 5.0)), Vector::Ones(2)), 8.0);
  EXPECT_THROW(quad_form(SpdMatrix::identity(3), Vector::Ones(2)), Error);
}

TEST(QuadForm, MatchesDoubleLoopAndIsPositive) {
  std::mt19937_64 eng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix m = oracle::random_spd(6, eng, 1e-3);
    const Vector u = oracle::gaussian(6, eng);
    const double q = quad_form(SpdMatrix(m), u);
    EXPECT_NEAR(q, oracle::quad(m, u), 1e-12 * std::abs(oracle::quad(m, u)));
    EXPECT_GT(q, 0.0);
  }
  EXPECT_EQ(quad_form(SpdMatrix::identity(4), Vector::Zero(4)), 0.0);
}

TEST(TraceSolve, Examples) {
  EXPECT_NEAR(trace_solve(SpdMatrix::identity(4), SpdMatrix::identity(4)), 4.0, 1e-15);
  EXPECT_NEAR(trace_solve(SpdMatrix(diag2(1.0, 2.0)), SpdMatrix(diag2(2.0, 2.0))), 3.0, 1e-15);
}

TEST(TraceSolve, MatchesExplicitInverse) {
  std::mt19937_64 eng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = oracle::random_spd(5, eng);
    const Matrix g = oracle::random_spd(5, eng);
    const double expected = oracle::trace(oracle::mul(oracle::inverse(a), g));
    EXPECT_NEAR(trace_solve(SpdMatrix(a), SpdMatrix(g)), expected, 1e-10 * std::abs(expected));
    EXPECT_NEAR(trace_solve(SpdMatrix(a), SpdMatrix(a)), 5.0, 1e-9 * 5.0);
  }
}

TEST(GeneralizedEig, MatchesJacobiOracle) {
  std::mt19937_64 eng(29);
  const Matrix a = oracle::random_spd(6, eng);
  const Matrix g = oracle::random_spd(6, eng);
  const auto [lo, hi] = oracle::gen_eig_range(g, a);
  const EigenRange r = generalized_eig_range(SpdMatrix(g), SpdMatrix(a));
  EXPECT_NEAR(r.lo, lo, 1e-10 * hi);
  EXPECT_NEAR(r.hi, hi, 1e-10 * hi);
}

TEST(LogDet, MatchesElimination) {
  std::mt19937_64 eng(31);
  const Matrix a = oracle::random_spd(8, eng);
  EXPECT_NEAR(SpdMatrix(a).log_det(), oracle::log_det(a), 1e-11);
}
