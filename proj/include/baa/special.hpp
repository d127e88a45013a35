#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "baa/errors.hpp"

namespace baa {

/// Upper exponential integral E1(x) = \int_x^\infty e^{-t}/t dt for x > 0.
///
/// Power series below x = 1, modified Lentz continued fraction above.
/// Both branches converge to double precision (|err| well under 1e-10).
inline double exp_integral(double x) {
    if (!(x > 0.0)) throw DomainError("exp_integral: x must be > 0 (E1 diverges at 0)");
    if (std::isinf(x)) return 0.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr int max_iter = 1000;

    if (x < 1.0) {
        // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        double sum = 0.0;
        double term = 1.0;
        for (int k = 1; k <= max_iter; ++k) {
            term *= -x / k;
            const double del = term / k;
            sum += del;
            if (std::abs(del) < std::abs(sum) * eps) break;
        }
        return -std::numbers::egamma - std::log(x) - sum;
    }

    // E1(x) = e^{-x} / (x + 1 - 1^2/(x + 3 - 2^2/(x + 5 - ...)))
    constexpr double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= max_iter; ++i) {
        const double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const double del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h * std::exp(-x);
}

}  // namespace baa
