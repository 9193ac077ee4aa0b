#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "rfattn/rng.hpp"
#include "rfattn/special.hpp"

using namespace rfattn;

namespace {

// E[f(Z)], Z ~ N(0,1), by the trapezoid rule on [-14, 14]; for smooth
// integrands with Gaussian tails this is accurate to ~1e-15.
double gauss_expect(const std::function<double(double)>& f, double h = 1e-3) {
  double sum = 0.0;
  const int n = static_cast<int>(28.0 / h);
  for (int i = 0; i <= n; ++i) {
    const double x = -14.0 + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    sum += w * f(x) * std::exp(-0.5 * x * x);
  }
  return sum * h / std::sqrt(2.0 * std::numbers::pi);
}

// E[f(Z) 1{a < Z < b}] by composite Simpson; f must be smooth on [a, b].
double gauss_integral(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  a = std::max(a, -14.0);
  b = std::min(b, 14.0);
  if (!(b > a)) return 0.0;
  const double h = (b - a) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = a + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * f(x) * std::exp(-0.5 * x * x);
  }
  return sum * h / 3.0 / std::sqrt(2.0 * std::numbers::pi);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

TEST(Hermite, SpecExamples) {
  EXPECT_EQ(hermite_eval(0, 3.7), 1.0);
  EXPECT_EQ(hermite_eval(3, 2.0), 2.0);
  EXPECT_EQ(hermite_eval(4, 1.0), -2.0);
  EXPECT_THROW(hermite_eval(-1, 0.0), DomainError);
}

TEST(Hermite, MatchesExplicitPolynomials) {
  const std::vector<std::function<double(double)>> explicit_he = {
      [](double) { return 1.0; },
      [](double x) { return x; },
      [](double x) { return x * x - 1; },
      [](double x) { return x * x * x - 3 * x; },
      [](double x) { return x * x * x * x - 6 * x * x + 3; },
      [](double x) { return std::pow(x, 5) - 10 * x * x * x + 15 * x; },
  };
  RngStream s(1);
  for (int i = 0; i < 100; ++i) {
    const double x = 6.0 * s.uniform() - 3.0;
    const auto all = hermite_values(5, x);
    for (int n = 0; n <= 5; ++n) {
      const double ref = explicit_he[n](x);
      EXPECT_NEAR(hermite_eval(n, x), ref, 1e-9 * std::max(1.0, std::abs(ref)));
      EXPECT_EQ(all[n], hermite_eval(n, x));
    }
  }
}

TEST(Hermite, OrthogonalityByQuadrature) {
  for (int m = 0; m <= 8; ++m) {
    for (int n = 0; n <= 8; ++n) {
      const double v = gauss_expect([&](double x) { return hermite_eval(m, x) * hermite_eval(n, x); });
      EXPECT_NEAR(v, m == n ? factorial(n) : 0.0, 1e-9 * factorial(std::max(m, n))) << m << "," << n;
    }
  }
}

TEST(Hermite, CorrelatedOrthogonalityMonteCarlo) {
  // E[He_m(X) He_n(Y)] = n! rho^n 1{m=n}; smaller version of the acceptance check.
  RngStream s(2024);
  const double rho = 0.5;
  const int draws = 200000;
  const int kmax = 4;
  std::vector<double> mean((kmax + 1) * (kmax + 1), 0.0), sq(mean.size(), 0.0);
  for (int i = 0; i < draws; ++i) {
    const double x = s.normal();
    const double y = rho * x + std::sqrt(1 - rho * rho) * s.normal();
    const auto hx = hermite_values(kmax, x);
    const auto hy = hermite_values(kmax, y);
    for (int m = 0; m <= kmax; ++m) {
      for (int n = 0; n <= kmax; ++n) {
        const double v = hx[m] * hy[n];
        mean[m * (kmax + 1) + n] += v;
        sq[m * (kmax + 1) + n] += v * v;
      }
    }
  }
  for (int m = 0; m <= kmax; ++m) {
    for (int n = 0; n <= kmax; ++n) {
      const double mu = mean[m * (kmax + 1) + n] / draws;
      const double var = sq[m * (kmax + 1) + n] / draws - mu * mu;
      const double se = std::sqrt(var / draws);
      const double expected = m == n ? factorial(n) * std::pow(rho, n) : 0.0;
      EXPECT_LE(std::abs(mu - expected), 4.0 * se + 1e-12) << m << "," << n;
    }
  }
}

TEST(Gaussian, PdfCdf) {
  EXPECT_DOUBLE_EQ(gaussian_pdf(0.0), 0.3989422804014327);
  EXPECT_EQ(gaussian_cdf(0.0), 0.5);
  EXPECT_NEAR(gaussian_cdf(-1.3) + gaussian_cdf(1.3), 1.0, 1e-15);
  // Reference values of Phi.
  EXPECT_NEAR(gaussian_cdf(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gaussian_cdf(-3.0), 0.0013498980316300946, 1e-17);
  EXPECT_NEAR(gaussian_cdf(-10.0), 7.619853024160527e-24, 1e-36);
}

TEST(Factorials, Values) {
  EXPECT_EQ(factorial(0), 1.0);
  EXPECT_EQ(factorial(5), 120.0);
  EXPECT_EQ(factorial(20), 2432902008176640000.0);
  EXPECT_NEAR(factorial(30) / 2.652528598121910586e32, 1.0, 1e-15);
  EXPECT_EQ(double_factorial(-1), 1.0);
  EXPECT_EQ(double_factorial(0), 1.0);
  EXPECT_EQ(double_factorial(7), 105.0);
  EXPECT_EQ(double_factorial(8), 384.0);
  EXPECT_THROW(factorial(-1), DomainError);
}

TEST(MonomialCoeffs, Examples) {
  EXPECT_EQ(monomial_hermite_coeffs(1).coeffs, (std::vector<double>{0, 1}));
  EXPECT_EQ(monomial_hermite_coeffs(2).coeffs, (std::vector<double>{1, 0, 1}));
  EXPECT_EQ(monomial_hermite_coeffs(4).coeffs, (std::vector<double>{3, 0, 6, 0, 1}));
  EXPECT_EQ(monomial_hermite_coeffs(0).truncation_order(), 0);
}

TEST(MonomialCoeffs, RoundTrip) {
  RngStream s(3);
  for (int n = 0; n <= 8; ++n) {
    const HermiteSeries series = monomial_hermite_coeffs(n);
    EXPECT_EQ(series.truncation_order(), n);
    for (int i = 0; i < 50; ++i) {
      const double x = 4.0 * s.uniform() - 2.0;
      const double ref = std::pow(x, n);
      EXPECT_NEAR(series(x), ref, 1e-8 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST(MonomialCoeffs, GaussianNormIsMoment) {
  // E[Z^{2n}] = (2n-1)!!
  for (int n = 0; n <= 6; ++n) {
    EXPECT_NEAR(monomial_hermite_coeffs(n).gaussian_norm_squared(), double_factorial(2 * n - 1),
                1e-9 * double_factorial(2 * n - 1));
  }
}

TEST(ShiftedRelu, ExampleCoefficients) {
  const HermiteSeries s = shifted_relu_hermite_coeffs(0.0, 10);
  EXPECT_EQ(s.truncation_order(), 10);
  EXPECT_NEAR(s.coeffs[0], 0.3989422804, 1e-10);
  EXPECT_EQ(s.coeffs[1], 0.5);
  EXPECT_NEAR(s.coeffs[2], 0.19947114020, 1e-11);
  EXPECT_EQ(s.coeffs[3], 0.0);
  EXPECT_THROW(shifted_relu_hermite_coeffs(0.0, 1), DomainError);
}

TEST(ShiftedRelu, CoefficientsAreProjections) {
  // a_n = E[relu(Z + c) He_n(Z)] / n!
  for (double c : {-1.0, 0.0, 0.5, 1.0}) {
    const HermiteSeries s = shifted_relu_hermite_coeffs(c, 12);
    for (int n = 0; n <= 12; ++n) {
      const double proj = gauss_expect([&](double x) { return relu(x + c) * hermite_eval(n, x); }, 2e-4) / factorial(n);
      EXPECT_NEAR(s.coeffs[n], proj, 1e-7) << "c=" << c << " n=" << n;
    }
  }
}

TEST(ShiftedRelu, SquaredErrorDecreasesWithOrder) {
  for (double c : {-1.0, 0.0, 0.5, 1.0}) {
    const double total = (1 + c * c) * gaussian_cdf(c) + c * gaussian_pdf(c);  // E[relu(Z+c)^2]
    double prev = INFINITY;
    for (int k : {4, 8, 16, 32, 64}) {
      const HermiteSeries s = shifted_relu_hermite_coeffs(c, k);
      const double parseval = total - s.gaussian_norm_squared();
      EXPECT_LE(parseval, prev) << "c=" << c << " K=" << k;
      EXPECT_GE(parseval, 0.0);
      prev = parseval;
      if (k <= 16) {
        // Independent check of the same error by direct quadrature.
        const double direct = gauss_expect([&](double x) { return std::pow(relu(x + c) - s(x), 2); }, 2e-4);
        EXPECT_NEAR(direct, parseval, 2e-7 + 1e-4 * parseval) << "c=" << c << " K=" << k;
      }
    }
    // The error decays like K^{-3/2}: about 2e-4 at K = 32 and below 1e-4 at K = 64.
    EXPECT_LT(prev, 1e-4) << "c=" << c;
  }
  const double at32 = 1.0 / 2.0 - shifted_relu_hermite_coeffs(0.0, 32).gaussian_norm_squared();
  EXPECT_NEAR(at32, 2.3048563017e-4, 1e-12);
}

TEST(BivariateNormal, MatchesQuadratureOracle) {
  struct Case {
    double h, k, rho, expected;
  };
  // Reference values from 30-digit adaptive quadrature.
  const Case cases[] = {
      {0, 0, 0.5, 1.0 / 3.0},
      {0.3, -0.7, 0.2, 0.31301622598648588},
      {-1, 0.5, 0.95, 0.30853751336083356},
      {1, 1, -0.97, 1.88403800598315e-18},
      {-0.5, -0.5, -0.5, 0.41922310903660271},
      {2, -1, 0.99, 0.022750131948179207},
  };
  for (const auto& c : cases) {
    EXPECT_NEAR(bivariate_normal_upper(c.h, c.k, c.rho), c.expected, 1e-13) << c.h << "," << c.k << "," << c.rho;
  }
  EXPECT_NEAR(bivariate_normal_upper(0.4, -0.3, 0.0), gaussian_cdf(-0.4) * gaussian_cdf(0.3), 1e-15);
}

TEST(ReluPair, MatchesQuadratureOracle) {
  struct Case {
    double h1, h2, rho, expected;
  };
  const Case cases[] = {
      {0, 0, 0.5, 0.30449889052211468},   {0.3, -0.7, 0.2, 0.11323256130923958},
      {1.5, 0.5, -0.6, 0.68666677183245237}, {-1, 2, 0.95, 0.31735343241025679},
      {2, 2, -0.97, 3.1080980664467862},  {0.5, -0.2, 0.0, 0.21415002039032172},
  };
  for (const auto& c : cases) {
    EXPECT_NEAR(relu_pair_expectation(c.h1, c.h2, c.rho), c.expected, 1e-12) << c.h1 << "," << c.h2 << "," << c.rho;
  }
}

TEST(ReluPair, EdgeCorrelations) {
  for (double h1 : {-1.0, 0.0, 0.7}) {
    for (double h2 : {-0.4, 0.0, 1.2}) {
      // Integrate only where both factors are positive, so the integrand is a smooth polynomial.
      const double same = gauss_integral([&](double x) { return (x + h1) * (x + h2); }, std::max(-h1, -h2), 14.0);
      const double opposite = gauss_integral([&](double x) { return (x + h1) * (h2 - x); }, -h1, h2);
      EXPECT_NEAR(relu_pair_expectation(h1, h2, 1.0), same, 1e-10);
      EXPECT_NEAR(relu_pair_expectation(h1, h2, -1.0), opposite, 1e-10);
      // Continuity into the interior.
      EXPECT_NEAR(relu_pair_expectation(h1, h2, 1.0 - 1e-9), same, 1e-4);
      EXPECT_NEAR(relu_pair_expectation(h1, h2, -1.0 + 1e-9), opposite, 1e-4);
    }
  }
  EXPECT_THROW(relu_pair_expectation(0, 0, 1.1), DomainError);
}
