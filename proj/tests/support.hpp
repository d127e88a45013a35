#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "baa/errors.hpp"

namespace testing_support {

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// E1 by quadrature after t = x e^s.
inline double e1_quadrature(double x) {
    const double upper = std::log(80.0 / x) + 1.0;
    return simpson([x](double s) { return std::exp(-x * std::exp(s)); }, std::min(0.0, upper), upper, 200000);
}

/// Swallow library warnings for the lifetime of the object.
struct QuietWarnings {
    baa::WarningHandler previous = baa::warning_handler();
    QuietWarnings() { baa::set_warning_handler([](const std::string&) {}); }
    ~QuietWarnings() { baa::set_warning_handler(previous); }
};

}  // namespace testing_support
