#include <gtest/gtest.h>

#include <deque>

#include "oracles.hpp"
#include "sharpbfgs/kernel.hpp"

using namespace sharpbfgs;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

/// Replays a fixed list of values, then zeros.
struct ScriptedSource {
  std::deque<double> values;
  double operator()() {
    if (values.empty()) return 0.0;
    const double v = values.front();
    values.pop_front();
    return v;
  }
};

}  // namespace

TEST(BfgsUpdate, FixedPointWhenGEqualsA) {
  std::mt19937_64 eng(1);
  const Matrix a = oracle::random_spd(5, eng);
  HessianApproxState st(a);
  const Vector u = oracle::gaussian(5, eng);
  ASSERT_EQ(bfgs_update(st, a * u, u), UpdateStatus::Applied);
  EXPECT_LE((st.g() - a).norm(), 1e-12 * a.norm());
}

TEST(BfgsUpdate, HandEvaluatedExample) {
  // A = diag(1,2), G = 3I, u = e2: -9 e2 e2^T / 3 + 4 e2 e2^T / 2.
  HessianApproxState st(3.0 * Matrix::Identity(2, 2));
  const Matrix a = diag({1.0, 2.0});
  const Vector u = Vector::Unit(2, 1);
  ASSERT_EQ(bfgs_update(st, a * u, u), UpdateStatus::Applied);
  EXPECT_LE((st.g() - diag({3.0, 2.0})).norm(), 1e-15);
  EXPECT_LE((st.h() - diag({1.0 / 3.0, 0.5})).norm(), 1e-15);
}

TEST(BfgsUpdate, MatchesExplicitFormulaAndInverse) {
  std::mt19937_64 eng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix a = oracle::random_spd(4, eng);
    const Matrix g = oracle::sandwich(a, oracle::uniform_vec(4, 1.0, 5.0, eng), eng);
    const Vector u = oracle::gaussian(4, eng);
    HessianApproxState st(g);
    ASSERT_EQ(bfgs_update(st, oracle::mul(a, u), u), UpdateStatus::Applied);
    const Matrix expected = oracle::bfgs(a, g, u);
    EXPECT_LE(oracle::frob(st.g() - expected), 1e-10 * oracle::frob(expected));
    const Vector au = oracle::mul(a, u);
    EXPECT_LE((oracle::mul(st.g(), u) - au).norm(), 1e-8 * au.norm());
    const Matrix inv = oracle::inverse(expected);
    EXPECT_LE(oracle::frob(st.h() - inv), 1e-9 * oracle::frob(inv));
    EXPECT_EQ(st.g(), st.g().transpose());
    EXPECT_EQ(st.h(), st.h().transpose());
  }
}

TEST(BfgsUpdate, DegenerateDirectionLeavesStateUnchanged) {
  HessianApproxState st(Matrix::Identity(3, 3));
  const Matrix before = st.g();
  EXPECT_EQ(bfgs_update(st, Vector::Zero(3), Vector::Zero(3)), UpdateStatus::DegenerateDirection);
  // u^T A u = 0 along u = e1 for A = diag(0, 1, 1)
  EXPECT_EQ(bfgs_update(st, Vector::Zero(3), Vector::Unit(3, 0)), UpdateStatus::DegenerateDirection);
  EXPECT_EQ(st.g(), before);
  EXPECT_EQ(st.update_count(), 0);
}

TEST(BfgsUpdate, DimensionMismatchThrows) {
  HessianApproxState st(Matrix::Identity(3, 3));
  EXPECT_THROW(bfgs_update(st, Vector::Ones(2), Vector::Ones(3)), Error);
}

TEST(BfgsSecant, AlreadySatisfiedIsFixedPoint) {
  std::mt19937_64 eng(3);
  const Matrix g = oracle::random_spd(4, eng);
  HessianApproxState st(g);
  const Vector s = Vector::Unit(4, 0);
  ASSERT_EQ(bfgs_update_secant(st, s, g * s), UpdateStatus::Applied);
  EXPECT_LE((st.g() - g).norm(), 1e-12 * g.norm());
}

TEST(BfgsSecant, QuadraticExample) {
  HessianApproxState st(4.0 * Matrix::Identity(2, 2));
  const Vector s = Vector::Ones(2);
  Vector y(2);
  y << 1.0, 4.0;
  ASSERT_EQ(bfgs_update_secant(st, s, y), UpdateStatus::Applied);
  EXPECT_LE((st.g() * s - y).norm(), 1e-8 * y.norm());
  // Same as the operator form with au = y.
  const Matrix expected = oracle::bfgs(diag({1.0, 4.0}), 4.0 * Matrix::Identity(2, 2), s);
  EXPECT_LE((st.g() - expected).norm(), 1e-14);
}

TEST(BfgsSecant, RandomSecantPostcondition) {
  std::mt19937_64 eng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix g = oracle::random_spd(6, eng);
    const Matrix j = oracle::random_spd(6, eng);
    const Vector s = oracle::gaussian(6, eng);
    const Vector y = oracle::mul(j, s);
    HessianApproxState st(g);
    ASSERT_EQ(bfgs_update_secant(st, s, y), UpdateStatus::Applied);
    EXPECT_LE((st.g() * s - y).norm(), 1e-8 * y.norm());
  }
}

TEST(BfgsSecant, CurvatureSkip) {
  HessianApproxState st(Matrix::Identity(2, 2));
  Vector s(2), y(2);
  s << 1.0, 0.0;
  y << -1.0, 0.5;
  EXPECT_EQ(bfgs_update_secant(st, s, y), UpdateStatus::CurvatureSkip);
  EXPECT_EQ(st.g(), Matrix::Identity(2, 2));
}

TEST(ScaleState, Examples) {
  HessianApproxState st(Matrix::Identity(3, 3));
  scale_state(st, 1.0);
  EXPECT_EQ(st.g(), Matrix::Identity(3, 3));
  scale_state(st, 4.0);
  EXPECT_EQ(st.g(), 4.0 * Matrix::Identity(3, 3));
  EXPECT_EQ(st.h(), 0.25 * Matrix::Identity(3, 3));
  EXPECT_THROW(scale_state(st, 0.5), Error);

  std::mt19937_64 eng(5);
  HessianApproxState r(oracle::random_spd(5, eng));
  const double factor = (1.0 + 0.1 / 2.0) * (1.0 + 0.1 / 2.0);
  scale_state(r, factor);
  EXPECT_LE(r.inverse_drift(), 1e-12);
}

TEST(Sigma, Examples) {
  std::mt19937_64 eng(6);
  const Matrix a = oracle::random_spd(5, eng);
  EXPECT_NEAR(sigma(SpdMatrix(a), SpdMatrix(a)), 0.0, 1e-12);
  EXPECT_NEAR(sigma(SpdMatrix(diag({1.0, 2.0})), SpdMatrix(diag({2.0, 2.0}))), 1.0, 1e-15);
}

TEST(Sigma, InitialBoundWithScaledIdentity) {
  std::mt19937_64 eng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const double mu = 1.0, lip = 50.0;
    Vector ev = oracle::uniform_vec(8, mu, lip, eng);
    ev(0) = mu;
    ev(7) = lip;
    const Matrix a = oracle::with_spectrum(ev, eng);
    const double s = sigma(SpdMatrix(a), SpdMatrix(Matrix(lip * Matrix::Identity(8, 8))));
    EXPECT_LE(s, 8.0 * (lip / mu - 1.0) + 1e-9);
    EXPECT_NEAR(s, oracle::sigma(a, lip * Matrix::Identity(8, 8)), 1e-9 * s);
  }
}

TEST(Theta, Examples) {
  std::mt19937_64 eng(8);
  const Matrix a = oracle::random_spd(4, eng);
  const Vector u = oracle::gaussian(4, eng);
  EXPECT_EQ(theta(SpdMatrix(a), a, u), 0.0);
  EXPECT_NEAR(theta(SpdMatrix::identity(4), Matrix(2.0 * Matrix::Identity(4, 4)), u), 0.5, 1e-15);
  EXPECT_THROW(theta(SpdMatrix::identity(4), Matrix(Matrix::Identity(4, 4)), Vector::Zero(4)), Error);
}

TEST(Theta, MatchesOracleAndContractionBound) {
  std::mt19937_64 eng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const double mu = 1.0, lip = 20.0;
    const Matrix a = oracle::with_spectrum(oracle::uniform_vec(5, mu, lip, eng), eng);
    const Matrix g = oracle::sandwich(a, oracle::uniform_vec(5, 1.0, lip / mu, eng), eng);
    const Vector u = oracle::gaussian(5, eng);
    const double th = theta(SpdMatrix(a), g, u);
    EXPECT_NEAR(th, oracle::theta(a, g, u), 1e-10);
    EXPECT_LE(th, 1.0 - mu / lip + 1e-9);
  }
}

TEST(Psi, Examples) {
  std::mt19937_64 eng(10);
  const Matrix a = oracle::random_spd(4, eng);
  EXPECT_NEAR(psi(SpdMatrix(a), SpdMatrix(a)), 0.0, 1e-12);
  EXPECT_NEAR(psi(SpdMatrix::identity(2), SpdMatrix(diag({2.0, 1.0}))), 1.0 - std::log(2.0), 1e-15);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = oracle::random_spd(4, eng);
    const Matrix y = oracle::random_spd(4, eng);
    const double expected = oracle::sigma(x, y) - (oracle::log_det(y) - oracle::log_det(x));
    EXPECT_NEAR(psi(SpdMatrix(x), SpdMatrix(y)), expected, 1e-10 * (1.0 + std::abs(expected)));
    EXPECT_GE(psi(SpdMatrix(x), SpdMatrix(y)), -1e-12);
  }
}

TEST(Omega, Examples) {
  EXPECT_EQ(omega(0.0), 0.0);
  EXPECT_NEAR(omega(1.0), 1.0 - std::log(2.0), 1e-16);
  EXPECT_THROW(omega(-1.0), Error);
  EXPECT_THROW(omega(-1.0 + 1e-13), Error);
  for (int k = 0; k <= 1000; ++k) {
    const double t = 10.0 * k / 1000.0;
    EXPECT_GE(omega(t), t * t / (2.0 * (t + 1.0)) - 1e-15);
  }
}

TEST(GreedyDirection, Examples) {
  std::mt19937_64 eng(11);
  const Matrix a = oracle::random_spd(4, eng);
  DirectionQuery q{a.diagonal(), [&](Index i) { return Vector(a.col(i)); }};
  EXPECT_EQ(greedy_direction(q, a.diagonal()), 0);

  DirectionQuery ones{Vector::Ones(3), nullptr};
  Vector g(3);
  g << 1.0, 5.0, 2.0;
  EXPECT_EQ(greedy_direction(ones, g), 1);
  g << 5.0, 1.0, 5.0;
  EXPECT_EQ(greedy_direction(ones, g), 0);

  DirectionQuery bad{Vector::Zero(3), nullptr};
  EXPECT_THROW(greedy_direction(bad, g), Error);
}

TEST(GreedyDirection, MatchesExhaustiveRatio) {
  std::mt19937_64 eng(12);
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix a = oracle::random_spd(6, eng);
    const Matrix g = oracle::random_spd(6, eng);
    Index best = 0;
    double best_ratio = -1.0;
    for (Index i = 0; i < 6; ++i) {
      const Vector e = Vector::Unit(6, i);
      const double r = oracle::quad(g, e) / oracle::quad(a, e);
      if (r > best_ratio) {
        best_ratio = r;
        best = i;
      }
    }
    DirectionQuery q{a.diagonal(), nullptr};
    EXPECT_EQ(greedy_direction(q, g.diagonal()), best);
  }
}

TEST(GreedyUpdate, GreedyFactor) {
  std::mt19937_64 eng(13);
  for (int rep = 0; rep < 200; ++rep) {
    const double mu = 0.5, lip = 10.0;
    const Index d = 6;
    const Matrix a = oracle::with_spectrum(oracle::uniform_vec(d, mu, lip, eng), eng);
    const Matrix g = oracle::sandwich(a, oracle::uniform_vec(d, 1.0, 30.0, eng), eng);
    HessianApproxState st(g);
    DirectionQuery q{a.diagonal(), [&](Index i) { return Vector(a.col(i)); }};
    const double before = oracle::sigma(a, g);
    greedy_update(st, q);
    const double after = oracle::sigma(a, st.g());
    EXPECT_LE(after, (1.0 - mu / (static_cast<double>(d) * lip)) * before + 1e-9);
  }
}

TEST(RandomDirection, IdentityFactorPassesDrawThrough) {
  ScriptedSource src{{1.0, 0.0, 0.0}};
  const Vector u = random_direction(UpperTriangular(Matrix::Identity(3, 3)), src);
  EXPECT_EQ(u, Vector::Unit(3, 0));
}

TEST(RandomDirection, SeededReplay) {
  std::mt19937_64 eng(14);
  const UpperTriangular r = cholesky(SpdMatrix(oracle::random_spd(3, eng)));
  GaussianSource s1(42), s2(42);
  for (int k = 0; k < 10; ++k) {
    EXPECT_EQ(random_direction(r, s1), random_direction(r, s2));
  }
}

TEST(RandomDirection, CovarianceMatchesInverse) {
  std::mt19937_64 eng(15);
  const Index d = 3;
  const Matrix g = oracle::random_spd(d, eng);
  const UpperTriangular r = cholesky(SpdMatrix(g));
  const Matrix target = oracle::inverse(g);
  GaussianSource src(99);
  const int n = 100000;
  Matrix sum = Matrix::Zero(d, d);
  Matrix sum_sq = Matrix::Zero(d, d);
  for (int k = 0; k < n; ++k) {
    const Vector u = random_direction(r, src);
    const Matrix outer = u * u.transpose();
    sum += outer;
    sum_sq += outer.cwiseProduct(outer);
  }
  const Matrix mean = sum / n;
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double var = sum_sq(i, j) / n - mean(i, j) * mean(i, j);
      const double se = std::sqrt(var / n);
      EXPECT_LE(std::abs(mean(i, j) - target(i, j)), 3.0 * se) << i << "," << j;
    }
  }
}

TEST(HessianApproxState, DriftStaysBoundedOverManyUpdates) {
  std::mt19937_64 eng(16);
  const Index d = 20;
  HessianApproxState st = HessianApproxState::scaled_identity(d, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const Matrix a = oracle::random_spd(d, eng);
    const Vector u = oracle::gaussian(d, eng);
    bfgs_update(st, a * u, u);
    if (k % 3 == 0) {
      scale_state(st, 1.01);
    }
    ASSERT_LE(st.inverse_drift(), 1e-7 * std::sqrt(static_cast<double>(d))) << k;
  }
  EXPECT_EQ(st.update_count(), 1000);
}

TEST(HessianApproxState, RefreshRestoresInverse) {
  std::mt19937_64 eng(17);
  HessianApproxState st(oracle::random_spd(5, eng));
  st.refresh_inverse();
  EXPECT_LE(st.inverse_drift(), 1e-12);
  EXPECT_GE(st.refresh_count(), 1);
}
