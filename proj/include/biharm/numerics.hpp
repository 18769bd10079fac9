#pragma once

#include <algorithm>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace biharm {

// Finite-difference weights at x0 for derivative orders 0..max_order on the
// given nodes (Fornberg's recursion). Result is indexed [order][node].
std::vector<std::vector<double>> fornberg_weights(double x0, const std::vector<double>& nodes,
                                                  int max_order);

int worker_count();

// FFTW planning is not thread safe; every plan is created and destroyed
// under this lock.
std::mutex& fftw_planner_mutex();

// Runs body(i) for i in [0, n) on a few threads. body must only touch
// disjoint output for different i.
void parallel_for(int n, const std::function<void(int)>& body);

// Gauss-Legendre nodes and weights on [a, b]
struct Quadrature1d {
  std::vector<double> x, w;
};
Quadrature1d gauss_legendre(int n, double a = -1.0, double b = 1.0);

// least-squares slope of log(y) against log(x)
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace biharm
