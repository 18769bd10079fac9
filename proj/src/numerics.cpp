#include "biharm/numerics.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>

namespace biharm {

std::vector<std::vector<double>> fornberg_weights(double x0, const std::vector<double>& x,
                                                  int m) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace biharm

namespace biharm {

int worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 16u));
}

void parallel_for(int n, const std::function<void(int)>& body) {
  const int nt = std::min(worker_count(), n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lk(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

Quadrature1d gauss_legendre(int n, double a, double b) {
  Quadrature1d q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    q.x[i] = 0.5 * (a + b) - 0.5 * (b - a) * z;
    q.x[n - 1 - i] = 0.5 * (a + b) + 0.5 * (b - a) * z;
    q.w[i] = q.w[n - 1 - i] = 0.5 * (b - a) * w;
  }
  return q;
}

}  // namespace biharm
