#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace biharm {

using ScalarFn = std::function<double(double, double, double)>;

// A closed-form potential on M, evaluable anywhere (for oracles).
struct Phantom {
  std::string name;
  ScalarFn q;
  // support descriptor: union of balls (centre, radius); empty = all of M
  std::vector<std::pair<std::array<double, 3>, double>> support;
  bool vanishes_on_boundary = true;

  double operator()(double x1, double x2, double x3) const { return q(x1, x2, x3); }
};

// Library: zero, constant (value c0), gauss-bump, two-bumps,
// boundary-nonzero, smooth-blob. Unknown names throw ConfigError.
Phantom make_phantom(const std::string& name, double c0 = 0.01);
std::vector<std::string> phantom_names();

// a e^{-|x - c|^2 / (2 s^2)} times a smooth bump vanishing at |x - c| = rc
double gauss_bump(const std::array<double, 3>& x, const std::array<double, 3>& c, double s, double rc, double a);

}  // namespace biharm
