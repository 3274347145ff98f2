#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "phonon_herald/rng.hpp"

using namespace herald;

namespace {

template <typename Draw>
std::pair<double, double> sample_mean_var(int n, Draw&& draw) {
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(draw());
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  return {mean, sum2 / n - mean * mean};
}

}  // namespace

TEST_CASE("streams are deterministic and channel-separated") {
  RngStream a = RngStream::derive(42, 17, 0);
  RngStream b = RngStream::derive(42, 17, 0);
  RngStream c = RngStream::derive(42, 17, 1);
  RngStream d = RngStream::derive(42, 18, 0);
  bool all_equal = true, channel_differs = false, index_differs = false;
  for (int i = 0; i < 64; ++i) {
    const double va = a.uniform();
    all_equal &= (va == b.uniform());
    channel_differs |= (va != c.uniform());
    index_differs |= (va != d.uniform());
  }
  CHECK(all_equal);
  CHECK(channel_differs);
  CHECK(index_differs);
}

TEST_CASE("uniform stays in [0,1)") {
  RngStream rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("exponential moments") {
  RngStream rng(2);
  const double rate = 3.0e4;
  const auto [mean, var] = sample_mean_var(200000, [&] { return rng.exponential(rate); });
  CHECK(mean == doctest::Approx(1.0 / rate).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / (rate * rate)).epsilon(0.03));
}

TEST_CASE("truncated exponential stays inside and matches conditional mean") {
  RngStream rng(3);
  const double rate = 1.0e5;
  const double span = 2.0e-5;  // rate*span = 2
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.truncated_exponential(rate, span);
    REQUIRE(x >= 0.0);
    REQUIRE(x < span);
    sum += x;
  }
  const double x0 = rate * span;
  const double expected = (1.0 / rate) - span * std::exp(-x0) / (1.0 - std::exp(-x0));
  CHECK(sum / n == doctest::Approx(expected).epsilon(0.01));

  // Negligible rate*span degenerates to uniform.
  RngStream rng2(4);
  const auto [mean_u, var_u] =
      sample_mean_var(100000, [&] { return rng2.truncated_exponential(0.0, 1.0); });
  CHECK(mean_u == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var_u == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}

TEST_CASE("bose-einstein sampler matches geometric moments") {
  for (const double mu : {0.05, 0.1, 1.0, 10.0}) {
    RngStream rng(100 + static_cast<std::uint64_t>(mu * 100));
    const auto [mean, var] = sample_mean_var(400000, [&] { return rng.bose_einstein(mu); });
    CHECK(mean == doctest::Approx(mu).epsilon(0.02));
    CHECK(var == doctest::Approx(mu * (1.0 + mu)).epsilon(0.04));
  }
  RngStream rng(5);
  CHECK(rng.bose_einstein(0.0) == 0);
}

TEST_CASE("binomial sampler: exact edges and moments across regimes") {
  RngStream rng(6);
  CHECK(rng.binomial(0, 0.5) == 0);
  CHECK(rng.binomial(100, 0.0) == 0);
  CHECK(rng.binomial(100, 1.0) == 100);

  struct Case {
    std::int64_t n;
    double p;
  };
  for (const Case c : {Case{30, 0.3}, Case{500, 0.01}, Case{5000, 0.4}, Case{200000, 0.002}}) {
    RngStream local(700 + c.n);
    const auto [mean, var] =
        sample_mean_var(60000, [&] { return local.binomial(c.n, c.p); });
    const double m = static_cast<double>(c.n) * c.p;
    CHECK(mean == doctest::Approx(m).epsilon(0.02));
    CHECK(var == doctest::Approx(m * (1.0 - c.p)).epsilon(0.05));
  }
}

TEST_CASE("poisson sampler moments in both regimes") {
  for (const double lambda : {0.3, 5.0, 50.0, 400.0}) {
    RngStream rng(900 + static_cast<std::uint64_t>(lambda));
    const auto [mean, var] = sample_mean_var(100000, [&] { return rng.poisson(lambda); });
    CHECK(mean == doctest::Approx(lambda).epsilon(0.02));
    CHECK(var == doctest::Approx(lambda).epsilon(0.05));
  }
  RngStream rng(7);
  CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("erlang is a sum of exponentials") {
  RngStream rng(8);
  const double rate = 2.0e5;
  const auto [mean, var] = sample_mean_var(300000, [&] { return rng.erlang(4, rate); });
  CHECK(mean == doctest::Approx(4.0 / rate).epsilon(0.005));
  CHECK(var == doctest::Approx(4.0 / (rate * rate)).epsilon(0.02));
}
