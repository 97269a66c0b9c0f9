#include <doctest.h>

#include <cmath>
#include <vector>

#include "lgv/rng.hpp"
#include "lgv/stats.hpp"

using namespace lgv;

TEST_CASE("philox4x32-10 reproduces the published known-answer vectors") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct per path and substream") {
  RandomStream a(42, 3, Stream::increments), b(42, 3, Stream::increments);
  RandomStream c(42, 4, Stream::increments), d(42, 3, Stream::initial);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    CHECK(x != d.normal());
  }
}

TEST_CASE("normal draws have unit variance and Gaussian tails") {
  RandomStream rs(7, 0, Stream::auxiliary);
  const int n = 400000;
  double s1 = 0, s2 = 0, s4 = 0;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    const double x = rs.normal();
    xs[i] = x;
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
  CHECK(ks_test(xs, normal_cdf).p_value > 1e-3);
}

TEST_CASE("uniform draws stay in [0, 1) and (0, 1]") {
  RandomStream rs(1, 1, Stream::auxiliary);
  for (int i = 0; i < 100000; ++i) {
    const double u = rs.uniform(), v = rs.uniform_open_low();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK((v > 0.0 && v <= 1.0));
  }
}

TEST_CASE("distribution functions match reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi2_sf(18.307038053275146, 10) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi2_isf(0.05, 10) == doctest::Approx(18.307038053275146).epsilon(1e-10));
  CHECK(kolmogorov_sf(1.358) == doctest::Approx(0.05).epsilon(1e-2));
  CHECK(bonferroni_z(1) == 3.0);
  // Same family-wise level: m·P(|Z| > z_m) = P(|Z| > 3).
  for (int m : {2, 10, 50}) {
    const double z = bonferroni_z(m);
    CHECK(m * std::erfc(z / std::sqrt(2.0)) == doctest::Approx(std::erfc(3.0 / std::sqrt(2.0))).epsilon(1e-9));
  }
}

TEST_CASE("batch means: SE of iid data matches sigma / sqrt(n)") {
  RandomStream rs(3, 0, Stream::auxiliary);
  std::vector<double> x(64000);
  for (auto& v : x) v = 2.0 * rs.normal() + 1.0;
  const MeanSE m = batch_means(x);
  CHECK(std::abs(m.mean - 1.0) < 5.0 * 2.0 / std::sqrt(64000.0));
  CHECK(m.se == doctest::Approx(2.0 / std::sqrt(64000.0)).epsilon(0.3));
  CHECK(effective_batches(10, 32) == 10);
}

TEST_CASE("weighted linear fit recovers an exact line") {
  std::vector<double> x{0, 1, 2, 3, 4}, y;
  for (double v : x) y.push_back(2.0 - 0.5 * v);
  const LinearFit f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(-0.5));
  CHECK(f.intercept == doctest::Approx(2.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
}
