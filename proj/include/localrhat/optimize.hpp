#pragma once

#include <cmath>
#include <utility>

namespace localrhat {

struct ScalarMax {
  double x;
  double value;
};

// Golden-section search for a maximum of f on [a, b]; assumes f unimodal there.
template <typename F>
ScalarMax golden_section_max(F&& f, double a, double b, double tol = 1e-10) {
  constexpr double inv_phi = 0.6180339887498948482;
  if (a > b) std::swap(a, b);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    // interval can no longer shrink in floating point
    if (c <= a || d >= b) break;
  }
  return fc >= fd ? ScalarMax{c, fc} : ScalarMax{d, fd};
}

}  // namespace localrhat
