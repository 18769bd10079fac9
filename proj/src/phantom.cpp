#include "biharm/phantom.hpp"

#include <cmath>

#include "biharm/error.hpp"

namespace biharm {

double gauss_bump(const std::array<double, 3>& x, const std::array<double, 3>& c, double s, double rc, double a) {
  const double r2 = (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]) + (x[2] - c[2]) * (x[2] - c[2]);
  const double u = r2 / (rc * rc);
  if (u >= 1.0) return 0.0;
  return a * std::exp(-r2 / (2.0 * s * s)) * std::exp(1.0 - 1.0 / (1.0 - u));
}

std::vector<std::string> phantom_names() {
  return {"zero", "constant", "gauss-bump", "two-bumps", "boundary-nonzero", "smooth-blob"};
}

Phantom make_phantom(const std::string& name, double c0) {
  Phantom p;
  p.name = name;
  if (name == "zero") {
    p.q = [](double, double, double) { return 0.0; };
  } else if (name == "constant") {
    p.q = [c0](double, double, double) { return c0; };
    p.vanishes_on_boundary = c0 == 0.0;
  } else if (name == "gauss-bump") {
    // width 0.15, cut off smoothly at radius 0.45 so it is zero on the caps
    const std::array<double, 3> c{0.5, 0.2, 0.1};
    p.q = [c](double x1, double x2, double x3) { return gauss_bump({x1, x2, x3}, c, 0.15, 0.45, 0.05); };
    p.support = {{c, 0.45}};
  } else if (name == "two-bumps") {
    const std::array<double, 3> a{0.4, -0.3, 0.1}, b{0.6, 0.25, -0.2};
    p.q = [a, b](double x1, double x2, double x3) {
      return gauss_bump({x1, x2, x3}, a, 0.12, 0.35, 0.04) + gauss_bump({x1, x2, x3}, b, 0.12, 0.35, -0.03);
    };
    p.support = {{a, 0.35}, {b, 0.35}};
  } else if (name == "boundary-nonzero") {
    const std::array<double, 3> c{0.5, 0.0, 0.0};
    p.q = [c](double x1, double x2, double x3) { return 0.02 + gauss_bump({x1, x2, x3}, c, 0.2, 0.45, 0.03); };
    p.vanishes_on_boundary = false;
  } else if (name == "smooth-blob") {
    // broad ellipsoid: semi-axes 0.45 along x1 and 0.7 across
    p.q = [](double x1, double x2, double x3) {
      const double u = (x1 - 0.5) * (x1 - 0.5) / 0.2025 + (x2 * x2 + x3 * x3) / 0.49;
      return u < 1.0 ? 0.05 * std::exp(1.0 - 1.0 / (1.0 - u)) : 0.0;
    };
    p.support = {{{0.5, 0.0, 0.0}, 0.7}};
  } else {
    std::string known;
    for (const auto& n : phantom_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown phantom '" + name + "' (known: " + known + ")");
  }
  return p;
}

}  // namespace biharm
