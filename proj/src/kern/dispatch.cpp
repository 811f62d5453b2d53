// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_table.hpp"

namespace partsmine::kern {
namespace {

Backend pick_auto() {
  if (const char* env = std::getenv("PARTSMINE_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::avx2;
    if (v != "auto" && v != "avx2")
      throw std::invalid_argument("PARTSMINE_KERNELS must be scalar, avx2 or auto");
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

struct State {
  Backend backend = pick_auto();
  const KernelTable* table =
      backend == Backend::avx2 ? &kAvx2Table : &kScalarTable;
};

State& state() {
  static State s;
  return s;
}

const KernelTable& table() { return *state().table; }

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kern: size mismatch");
}

}  // namespace

Backend active_backend() { return state().backend; }

bool backend_supported(Backend b) {
  return b == Backend::scalar || cpu_has_avx2();
}

std::string_view backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
  if (!backend_supported(b))
    throw std::invalid_argument("kern: backend not supported on this CPU");
  state().backend = b;
  state().table = b == Backend::avx2 ? &kAvx2Table : &kScalarTable;
}

void reset_backend() {
  state().backend = pick_auto();
  state().table =
      state().backend == Backend::avx2 ? &kAvx2Table : &kScalarTable;
}

float dot(std::span<const float> a, std::span<const float> b) {
  check_same_size(a.size(), b.size());
  return table().dot_f32(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return table().dot_f64(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  check_same_size(a.size(), b.size());
  return table().sqdist_f32(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size());
  return table().sqdist_f64(a.data(), b.data(), a.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  check_same_size(x.size(), y.size());
  table().axpy_f32(alpha, x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size());
  table().axpy_f64(alpha, x.data(), y.data(), x.size());
}

float sum(std::span<const float> x) { return table().sum_f32(x.data(), x.size()); }

double sum(std::span<const double> x) { return table().sum_f64(x.data(), x.size()); }

float exp_neg(float x) { return detail::exp_neg_one(x); }

void gauss_kernel_row(float xi, float yi, float ri, float gi, float bi,
                      std::span<const float> px, std::span<const float> py,
                      std::span<const float> pr, std::span<const float> pg,
                      std::span<const float> pb, const GaussRowParams& params,
                      std::span<float> out) {
  table().gauss_row(xi, yi, ri, gi, bi, px.data(), py.data(), pr.data(),
                    pg.data(), pb.data(), params, out.data(), out.size());
}

}  // namespace partsmine::kern
