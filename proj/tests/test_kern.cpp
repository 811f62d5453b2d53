// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "partsmine/kernels.hpp"

using namespace partsmine;

namespace {

struct BackendGuard {
  ~BackendGuard() { kern::reset_backend(); }
};

std::vector<float> random_floats(std::mt19937_64& rng, std::size_t n,
                                 float lo = -2.0f, float hi = 2.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

std::vector<double> random_doubles(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("dot and sum match a plain double reference") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(3),
                        std::size_t(8), std::size_t(13), std::size_t(64),
                        std::size_t(257)}) {
    const auto a = random_floats(rng, n);
    const auto b = random_floats(rng, n);
    double ref_dot = 0.0, ref_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ref_dot += static_cast<double>(a[i]) * b[i];
      ref_sum += a[i];
    }
    CHECK(kern::dot(std::span<const float>(a), std::span<const float>(b)) ==
          doctest::Approx(ref_dot).epsilon(1e-4));
    CHECK(kern::sum(std::span<const float>(a)) ==
          doctest::Approx(ref_sum).epsilon(1e-4));
  }
}

TEST_CASE("squared_distance accumulates in double") {
  std::mt19937_64 rng(12);
  const auto a = random_floats(rng, 301);
  const auto b = random_floats(rng, 301);
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    ref += d * d;
  }
  const double got =
      kern::squared_distance(std::span<const float>(a), std::span<const float>(b));
  CHECK(std::abs(got - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("size mismatches are rejected") {
  std::vector<float> a(4, 1.0f), b(5, 1.0f);
  CHECK_THROWS_AS(kern::dot(std::span<const float>(a), std::span<const float>(b)),
                  std::invalid_argument);
}

TEST_CASE("exp_neg tracks std::exp") {
  CHECK(kern::exp_neg(0.0f) == 1.0f);
  CHECK(kern::exp_neg(100.0f) == 0.0f);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> u(0.0f, 60.0f);
  for (int i = 0; i < 20000; ++i) {
    const float x = u(rng);
    const double want = std::exp(-static_cast<double>(x));
    const double got = kern::exp_neg(x);
    CHECK(std::abs(got - want) <= 2e-6 * want);
  }
}

TEST_CASE("avx2 backend is bit-identical to scalar" *
          doctest::skip(!kern::backend_supported(kern::Backend::avx2))) {
  BackendGuard guard;
  std::mt19937_64 rng(14);
  for (std::size_t n : {std::size_t(1), std::size_t(5), std::size_t(8),
                        std::size_t(9), std::size_t(16), std::size_t(31),
                        std::size_t(100), std::size_t(1024), std::size_t(1027)}) {
    const auto a = random_floats(rng, n, -30.0f, 30.0f);
    const auto b = random_floats(rng, n, -30.0f, 30.0f);
    const auto ad = random_doubles(rng, n);
    const auto bd = random_doubles(rng, n);
    auto ya = random_floats(rng, n);
    auto yb = ya;
    auto yda = random_doubles(rng, n);
    auto ydb = yda;

    kern::force_backend(kern::Backend::scalar);
    const float dot_s = kern::dot(std::span<const float>(a), std::span<const float>(b));
    const double dotd_s =
        kern::dot(std::span<const double>(ad), std::span<const double>(bd));
    const double sq_s =
        kern::squared_distance(std::span<const float>(a), std::span<const float>(b));
    const float sum_s = kern::sum(std::span<const float>(a));
    kern::axpy(1.7f, std::span<const float>(a), std::span<float>(ya));
    kern::axpy(0.3, std::span<const double>(ad), std::span<double>(yda));

    kern::force_backend(kern::Backend::avx2);
    const float dot_v = kern::dot(std::span<const float>(a), std::span<const float>(b));
    const double dotd_v =
        kern::dot(std::span<const double>(ad), std::span<const double>(bd));
    const double sq_v =
        kern::squared_distance(std::span<const float>(a), std::span<const float>(b));
    const float sum_v = kern::sum(std::span<const float>(a));
    kern::axpy(1.7f, std::span<const float>(a), std::span<float>(yb));
    kern::axpy(0.3, std::span<const double>(ad), std::span<double>(ydb));

    CHECK(std::memcmp(&dot_s, &dot_v, sizeof dot_s) == 0);
    CHECK(std::memcmp(&dotd_s, &dotd_v, sizeof dotd_s) == 0);
    CHECK(std::memcmp(&sq_s, &sq_v, sizeof sq_s) == 0);
    CHECK(std::memcmp(&sum_s, &sum_v, sizeof sum_s) == 0);
    CHECK(std::memcmp(ya.data(), yb.data(), ya.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(yda.data(), ydb.data(), yda.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("gauss_kernel_row matches the direct formula and is backend-stable") {
  BackendGuard guard;
  std::mt19937_64 rng(15);
  const std::size_t n = 333;
  const auto px = random_floats(rng, n, 0.0f, 64.0f);
  const auto py = random_floats(rng, n, 0.0f, 64.0f);
  const auto pr = random_floats(rng, n, 0.0f, 255.0f);
  const auto pg = random_floats(rng, n, 0.0f, 255.0f);
  const auto pb = random_floats(rng, n, 0.0f, 255.0f);
  kern::GaussRowParams params{10.0f, 1.0f / (2 * 8.0f * 8.0f),
                              1.0f / (2 * 20.0f * 20.0f), 3.0f,
                              1.0f / (2 * 3.0f * 3.0f)};

  std::vector<float> out(n);
  kern::gauss_kernel_row(30.0f, 31.0f, 120.0f, 90.0f, 60.0f, px, py, pr, pg, pb,
                         params, out);
  for (std::size_t j = 0; j < n; j += 37) {
    const double dx = 30.0 - px[j], dy = 31.0 - py[j];
    const double dpos2 = dx * dx + dy * dy;
    const double dr = 120.0 - pr[j], dg = 90.0 - pg[j], db = 60.0 - pb[j];
    const double dcol2 = dr * dr + dg * dg + db * db;
    const double want =
        10.0 * std::exp(-(dpos2 / (2 * 64.0) + dcol2 / (2 * 400.0))) +
        3.0 * std::exp(-dpos2 / (2 * 9.0));
    CHECK(out[j] == doctest::Approx(want).epsilon(1e-5));
  }

  if (kern::backend_supported(kern::Backend::avx2)) {
    kern::force_backend(kern::Backend::scalar);
    std::vector<float> out_s(n);
    kern::gauss_kernel_row(30.0f, 31.0f, 120.0f, 90.0f, 60.0f, px, py, pr, pg,
                           pb, params, out_s);
    kern::force_backend(kern::Backend::avx2);
    std::vector<float> out_v(n);
    kern::gauss_kernel_row(30.0f, 31.0f, 120.0f, 90.0f, 60.0f, px, py, pr, pg,
                           pb, params, out_v);
    CHECK(std::memcmp(out_s.data(), out_v.data(), n * sizeof(float)) == 0);
  }
}
