#include "lnlab/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "lnlab/error.hpp"
#include "lnlab/rng.hpp"

namespace lnlab {

Matrix softmax_columns(const Matrix& s) {
  if (!all_finite(s)) throw NonFiniteError("softmax_columns: non-finite input");
  Matrix out(s.rows(), s.cols());
  for (std::size_t j = 0; j < s.cols(); ++j) {
    auto in = s.col(j);
    auto o = out.col(j);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      o[i] = std::exp(in[i] - mx);
      total += o[i];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

Moments moments(const Matrix& x) {
  const std::size_t count = x.size();
  if (count < 2) throw DomainError("moments: variance needs at least two entries");
  double abs_sum = 0.0;
  double sum = 0.0;
  for (double v : x.data()) {
    abs_sum += std::abs(v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (double v : x.data()) sq += (v - mean) * (v - mean);
  Moments m;
  m.frob = frobenius_norm(x);
  m.mean_abs = abs_sum / static_cast<double>(count);
  m.var = sq / static_cast<double>(count - 1);
  return m;
}

double spectral_norm(const Matrix& w, double tol, std::size_t max_iter) {
  if (w.empty()) throw DomainError("spectral_norm: empty matrix");
  if (!all_finite(w)) throw NonFiniteError("spectral_norm: non-finite input");
  if (max_abs(w) == 0.0) return 0.0;

  // Fixed pseudo-random start so the result is reproducible and almost surely
  // not orthogonal to the top right-singular vector.
  RngStream rng(0x5eed5eedULL, w.cols());
  Vector v(w.cols());
  for (double& x : v) x = rng.uniform(0.5, 1.5);
  double nv = norm2(v);
  for (double& x : v) x /= nv;

  const Matrix wt = transpose(w);
  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector u = matvec(w, v);
    const double sigma = norm2(u);
    if (sigma == 0.0) {
      // v landed in the null space; restart from another deterministic vector.
      for (double& x : v) x = rng.uniform(-1.0, 1.0);
      nv = norm2(v);
      for (double& x : v) x /= nv;
      continue;
    }
    Vector next = matvec(wt, u);
    nv = norm2(next);
    for (double& x : next) x /= nv;
    v = std::move(next);
    if (it > 0 && std::abs(sigma - estimate) <= tol * sigma) return sigma;
    estimate = sigma;
  }
  throw ConvergenceError("spectral_norm: no convergence within " + std::to_string(max_iter) +
                             " iterations",
                         estimate);
}

std::size_t thread_budget() {
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LNLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return hw;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lnlab
