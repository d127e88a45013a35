#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "baa/errors.hpp"

namespace baa {

/// dBm to watts: 10^((dBm - 30) / 10).
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// Physical-layer constants shared by every formula and simulator.
///
/// Defaults follow the single-cell experiment setup: R = 100 m, alpha = 3,
/// M = 1000 sub-channels, P0 = 0.1 W, N0 = -80 dBm, Q = 16 bits, BER = 1e-3.
/// The bandwidth is not pinned by the experiments; 1 MHz gives Ts = 1 ms.
struct SystemParams {
    double p0 = 0.1;                      ///< per-device average transmit power budget [W]
    std::int64_t m = 1000;                ///< OFDM sub-channel count
    double b = 1.0e6;                     ///< total bandwidth [Hz]
    double alpha = 3.0;                   ///< path-loss exponent
    double r_cell = 100.0;                ///< cell radius [m]
    double g_th = 1.0;                    ///< power-cutoff threshold on |h|^2
    double n0 = dbm_to_watts(-80.0);      ///< noise power [W]
    int q_bits = 16;                      ///< quantization resolution [bits/parameter]
    double ber = 1e-3;                    ///< target bit error rate

    /// OFDM symbol duration Ts = M / B, so that Ts * B_sub = 1 with B_sub = B / M.
    double t_s() const { return static_cast<double>(m) / b; }
    double b_sub() const { return b / static_cast<double>(m); }

    void validate() const {
        if (!(p0 > 0)) throw DomainError("SystemParams: p0 must be > 0");
        if (m < 1) throw DomainError("SystemParams: m must be >= 1");
        if (!(b > 0)) throw DomainError("SystemParams: b must be > 0");
        if (!(alpha > 0)) throw DomainError("SystemParams: alpha must be > 0");
        if (!(r_cell > 0)) throw DomainError("SystemParams: r_cell must be > 0");
        if (!(g_th >= 0)) throw DomainError("SystemParams: g_th must be >= 0");
        if (!(n0 > 0)) throw DomainError("SystemParams: n0 must be > 0");
        if (q_bits < 1 || q_bits > 32) throw DomainError("SystemParams: q_bits must be in [1, 32]");
        if (!(ber > 0 && ber < 1)) throw DomainError("SystemParams: ber must be in (0, 1)");
    }
};

/// Scheduling scenario: device population, interior radius, round budget, model size.
struct ScenarioParams {
    std::int64_t k_devices = 200;
    double r_in = 50.0;
    std::int64_t n_cr = 100;
    std::int64_t q_dim = 582026;

    void validate(double r_cell) const {
        if (k_devices < 1) throw DomainError("ScenarioParams: k_devices must be >= 1");
        if (!(r_in > 0) || r_in > r_cell)
            throw DomainError("ScenarioParams: r_in must satisfy 0 < r_in <= r_cell");
        if (n_cr < 1) throw DomainError("ScenarioParams: n_cr must be >= 1");
        if (q_dim < 1) throw DomainError("ScenarioParams: q_dim must be >= 1");
    }
};

}  // namespace baa
