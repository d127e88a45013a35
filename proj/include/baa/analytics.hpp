#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "baa/errors.hpp"
#include "baa/params.hpp"
#include "baa/special.hpp"

/// Closed-form communication and learning metrics for broadband analog
/// aggregation over a single-cell random network. Every function here is pure.
namespace baa::analytics {

enum class Axis { TruncationRatio, SnrLinear, SnrDb, DataFraction, Gain };

inline std::string_view to_string(Axis a) {
    switch (a) {
        case Axis::TruncationRatio: return "truncation-ratio";
        case Axis::SnrLinear: return "snr-linear";
        case Axis::SnrDb: return "snr-db";
        case Axis::DataFraction: return "data-fraction";
        case Axis::Gain: return "gain";
    }
    return "?";
}

struct CurvePoint {
    double x;
    double y;
};

/// Ordered (x, y) samples of a tradeoff; abscissae strictly increasing.
struct TradeoffCurve {
    Axis x_axis;
    Axis y_axis;
    std::vector<CurvePoint> points;
};

namespace detail {

inline void require_strictly_increasing(const std::vector<double>& grid, const char* what) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw DomainError(std::string(what) + ": grid must be strictly increasing");
}

inline double log_binomial_coefficient(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

inline double binomial_pmf(std::int64_t n, double p, std::int64_t k) {
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    const double lp = log_binomial_coefficient(n, k) + static_cast<double>(k) * std::log(p) +
                      static_cast<double>(n - k) * std::log1p(-p);
    return std::exp(lp);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SNR-truncation tradeoff

/// Fraction of parameters lost to sub-channel cutoff as q grows: 1 - e^{-g_th}.
inline double truncation_ratio(double g_th) {
    if (!(g_th >= 0.0)) throw DomainError("truncation_ratio: g_th must be >= 0");
    return -std::expm1(-g_th);
}

/// Inverse of truncation_ratio: the cutoff that yields truncation ratio zeta.
inline double threshold_for_truncation(double zeta) {
    if (!(zeta >= 0.0 && zeta < 1.0)) throw DomainError("threshold_for_truncation: zeta must be in [0, 1)");
    return -std::log1p(-zeta);
}

/// Largest aligned receive power a device at distance r can sustain under the
/// average power budget: P0 / (M r^alpha E1(g_th)).
inline double aligned_receive_power(const SystemParams& p, double r) {
    if (!(r > 0.0)) throw DomainError("aligned_receive_power: distance must be > 0");
    if (!(p.g_th > 0.0)) throw DomainError("aligned_receive_power: g_th must be > 0");
    return p.p0 / (static_cast<double>(p.m) * std::pow(r, p.alpha) * exp_integral(p.g_th));
}

/// Receive SNR rho0 / N0 when amplitudes are aligned to the furthest active device.
/// g_th = 0 makes the inversion power unbounded; the SNR collapses to 0 (with a warning).
inline double receive_snr(const SystemParams& p, double r_max) {
    if (!(r_max > 0.0)) throw DomainError("receive_snr: r_max must be > 0");
    if (!(p.g_th >= 0.0)) throw DomainError("receive_snr: g_th must be >= 0");
    if (p.g_th == 0.0) {
        warn("receive_snr: g_th = 0, E1 diverges and the aligned SNR is 0");
        return 0.0;
    }
    return aligned_receive_power(p, r_max) / p.n0;
}

/// Receive SNR as a function of the truncation ratio, one point per zeta.
inline TradeoffCurve snr_truncation_curve(const SystemParams& p, double r_max,
                                          const std::vector<double>& zeta_grid) {
    detail::require_strictly_increasing(zeta_grid, "snr_truncation_curve");
    TradeoffCurve curve{Axis::TruncationRatio, Axis::SnrLinear, {}};
    curve.points.reserve(zeta_grid.size());
    for (double zeta : zeta_grid) {
        if (!(zeta > 0.0 && zeta < 1.0))
            throw DomainError("snr_truncation_curve: every zeta must lie in (0, 1)");
        SystemParams at = p;
        at.g_th = threshold_for_truncation(zeta);
        curve.points.push_back({zeta, receive_snr(at, r_max)});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Scheduling: data fraction, device counts, distance extremes

inline double fraction_exploited(double r_in, double r_cell) {
    if (!(r_cell > 0.0)) throw DomainError("fraction_exploited: r_cell must be > 0");
    if (!(r_in > 0.0) || r_in > r_cell) throw DomainError("fraction_exploited: need 0 < r_in <= r_cell");
    const double ratio = r_in / r_cell;
    return ratio * ratio;
}

/// Pr(K_in = k): Binomial(K, (r_in / R)^2).
inline double k_in_pmf(std::int64_t k_devices, double r_in, double r_cell, std::int64_t k) {
    if (k_devices < 1) throw DomainError("k_in_pmf: k_devices must be >= 1");
    if (k < 0 || k > k_devices) throw DomainError("k_in_pmf: k must lie in [0, K]");
    return detail::binomial_pmf(k_devices, fraction_exploited(r_in, r_cell), k);
}

inline std::vector<double> k_in_distribution(std::int64_t k_devices, double r_in, double r_cell) {
    std::vector<double> pmf(static_cast<std::size_t>(k_devices) + 1);
    for (std::int64_t k = 0; k <= k_devices; ++k) pmf[static_cast<std::size_t>(k)] = k_in_pmf(k_devices, r_in, r_cell, k);
    return pmf;
}

/// Law of the largest of K i.i.d. distances uniform over a disk of radius R.
struct MaxDistanceLaw {
    std::int64_t k_devices;
    double r_cell;

    /// f(r) = 2K r^{2K-1} / R^{2K} on [0, R].
    double pdf(double r) const {
        if (r < 0.0 || r > r_cell) return 0.0;
        const double twok = 2.0 * static_cast<double>(k_devices);
        return twok / r_cell * std::pow(r / r_cell, twok - 1.0);
    }
    double cdf(double r) const {
        if (r <= 0.0) return 0.0;
        if (r >= r_cell) return 1.0;
        return std::pow(r / r_cell, 2.0 * static_cast<double>(k_devices));
    }
    double mean() const {
        const double twok = 2.0 * static_cast<double>(k_devices);
        return twok / (twok + 1.0) * r_cell;
    }
};

inline MaxDistanceLaw max_distance_moments(std::int64_t k_devices, double r_cell) {
    if (k_devices < 1) throw DomainError("max_distance_moments: K must be >= 1");
    if (!(r_cell > 0.0)) throw DomainError("max_distance_moments: r_cell must be > 0");
    return {k_devices, r_cell};
}

// ---------------------------------------------------------------------------
// Expected receive SNR under the two scheduling schemes

/// E[rho0] / N0 with every device scheduled: 2K/(2K - alpha) * P0 / (M R^alpha E1(g_th)) / N0.
/// The underlying integral needs 2K - alpha - 1 >= 0.
inline double expected_snr_all_inclusive(const SystemParams& p, std::int64_t k_devices) {
    if (k_devices < 1) throw DomainError("expected_snr_all_inclusive: K must be >= 1");
    const double twok = 2.0 * static_cast<double>(k_devices);
    if (twok - p.alpha - 1.0 < 0.0)
        throw ConvergenceError(
            "expected_snr_all_inclusive: E[r_max^-alpha] diverges unless 2K - alpha - 1 >= 0");
    return twok / (twok - p.alpha) * aligned_receive_power(p, p.r_cell) / p.n0;
}

struct CellInteriorSnr {
    double snr;                 ///< E[rho0(R_in)] / N0
    double c_factor;            ///< binomial-weighted sum over k = 2..K
    double mass_k_ge_2;         ///< Pr(K_in >= 2), the total weight of that sum
    bool within_alpha3_bound;   ///< 1 <= c <= 4 (only meaningful for alpha = 3)

    /// c normalized by its total weight: E[2k/(2k - alpha) | K_in >= 2].
    double normalized_c() const { return mass_k_ge_2 > 0.0 ? c_factor / mass_k_ge_2 : 0.0; }
};

/// c(R_in) = sum_{k=2}^{K} 2k/(2k - alpha) Pr(K_in = k); the k = 0, 1 terms are dropped.
inline double interior_scaling_factor(double alpha, std::int64_t k_devices, double r_in, double r_cell) {
    if (k_devices < 2) throw DomainError("interior_scaling_factor: K must be >= 2 (the sum starts at k = 2)");
    double c = 0.0;
    for (std::int64_t k = 2; k <= k_devices; ++k) {
        const double twok = 2.0 * static_cast<double>(k);
        c += twok / (twok - alpha) * k_in_pmf(k_devices, r_in, r_cell, k);
    }
    return c;
}

inline CellInteriorSnr expected_snr_cell_interior(const SystemParams& p, const ScenarioParams& s) {
    if (s.k_devices < 2) throw DomainError("expected_snr_cell_interior: K must be >= 2");
    s.validate(p.r_cell);
    CellInteriorSnr out{};
    out.c_factor = interior_scaling_factor(p.alpha, s.k_devices, s.r_in, p.r_cell);
    out.mass_k_ge_2 = 1.0 - k_in_pmf(s.k_devices, s.r_in, p.r_cell, 0) - k_in_pmf(s.k_devices, s.r_in, p.r_cell, 1);
    out.snr = out.c_factor * aligned_receive_power(p, s.r_in) / p.n0;
    out.within_alpha3_bound = out.c_factor >= 1.0 && out.c_factor <= 4.0;
    return out;
}

/// Prefactor a = (2K - alpha)/(2K) * c(R_in) of the SNR gain.
inline double snr_gain_prefactor(const SystemParams& p, const ScenarioParams& s) {
    const double twok = 2.0 * static_cast<double>(s.k_devices);
    return (twok - p.alpha) / twok * interior_scaling_factor(p.alpha, s.k_devices, s.r_in, p.r_cell);
}

/// SNR gain of cell-interior over all-inclusive scheduling: a (R / R_in)^alpha.
inline double snr_gain(const SystemParams& p, const ScenarioParams& s) {
    const double interior = expected_snr_cell_interior(p, s).snr;
    const double all = expected_snr_all_inclusive(p, s.k_devices);
    return interior / all;
}

/// Reliability-quantity tradeoff G_SNR = a (1 / F_DAT)^{alpha/2}, with R_in = R sqrt(F_DAT).
inline TradeoffCurve reliability_quantity_curve(const SystemParams& p, std::int64_t k_devices,
                                                const std::vector<double>& f_dat_grid) {
    detail::require_strictly_increasing(f_dat_grid, "reliability_quantity_curve");
    TradeoffCurve curve{Axis::DataFraction, Axis::Gain, {}};
    curve.points.reserve(f_dat_grid.size());
    for (double f : f_dat_grid) {
        if (!(f > 0.0 && f <= 1.0)) throw DomainError("reliability_quantity_curve: F_DAT must lie in (0, 1]");
        ScenarioParams s;
        s.k_devices = k_devices;
        s.r_in = std::min(p.r_cell, p.r_cell * std::sqrt(f));
        const double a = snr_gain_prefactor(p, s);
        curve.points.push_back({f, a * std::pow(1.0 / f, p.alpha / 2.0)});
    }
    return curve;
}

struct AllExploited {
    double exact;
    double approx;
};

/// Probability that every device is interior in at least one of N_CR i.i.d. rounds.
inline AllExploited p_all_exploited(std::int64_t k_devices, std::int64_t n_cr, double p_in) {
    if (k_devices < 1) throw DomainError("p_all_exploited: K must be >= 1");
    if (n_cr < 1) throw DomainError("p_all_exploited: N_CR must be >= 1");
    if (!(p_in >= 0.0 && p_in <= 1.0)) throw DomainError("p_all_exploited: p_in must lie in [0, 1]");
    const double miss = std::pow(1.0 - p_in, static_cast<double>(n_cr));
    const double k = static_cast<double>(k_devices);
    return {std::pow(1.0 - miss, k), 1.0 - k * miss};
}

// ---------------------------------------------------------------------------
// Latency: analog vs digital aggregation

/// OFDM symbols needed to carry q parameters, zero-padding the last block.
inline std::int64_t ofdm_symbols(std::int64_t q_dim, std::int64_t m) {
    return (q_dim + m - 1) / m;
}

/// Per-round latency of analog aggregation: ceil(q / M) Ts, independent of K.
inline double latency_baa(std::int64_t q_dim, const SystemParams& p) {
    if (q_dim < 1) throw DomainError("latency_baa: q must be >= 1");
    return static_cast<double>(ofdm_symbols(q_dim, p.m)) * p.t_s();
}

/// SNR gap of the adaptive MQAM fit: -1.5 / ln(5 BER). Requires BER < 0.2.
inline double mqam_snr_gap(double ber) {
    if (!(ber > 0.0 && ber < 0.2)) throw DomainError("mqam_snr_gap: BER must lie in (0, 0.2)");
    return -1.5 / std::log(5.0 * ber);
}

/// Per-sub-channel receive SNR of one OFDMA device holding M/K sub-channels and
/// the power budget K P0 / M per sub-channel.
inline double digital_receive_snr(const SystemParams& p, std::int64_t k_devices, double r_k) {
    if (k_devices < 1) throw DomainError("digital_receive_snr: K must be >= 1");
    return static_cast<double>(k_devices) * aligned_receive_power(p, r_k) / p.n0;
}

/// Instantaneous rate of one sub-channel with gain |h|^2 (zero when cut off).
inline double rate_digital_instantaneous(const SystemParams& p, std::int64_t k_devices, double r_k, double gain) {
    if (gain < p.g_th) return 0.0;
    return p.b_sub() * std::log2(1.0 + mqam_snr_gap(p.ber) * digital_receive_snr(p, k_devices, r_k));
}

/// Expected sum rate of one device: (M/K) B_sub log2(1 + gap rho_k) e^{-g_th}.
/// M/K stays real-valued.
inline double rate_digital_expected(const SystemParams& p, std::int64_t k_devices, double r_k) {
    if (!(p.g_th > 0.0)) throw DomainError("rate_digital_expected: g_th must be > 0");
    const double gap = mqam_snr_gap(p.ber);
    const double m_k = static_cast<double>(p.m) / static_cast<double>(k_devices);
    return m_k * p.b_sub() * std::log2(1.0 + gap * digital_receive_snr(p, k_devices, r_k)) * std::exp(-p.g_th);
}

/// Expected upload latency of one device: q Q / R_k.
inline double latency_digital_device(const SystemParams& p, std::int64_t k_devices, std::int64_t q_dim, double r_k) {
    return static_cast<double>(q_dim) * p.q_bits / rate_digital_expected(p, k_devices, r_k);
}

/// Straggler-bound round latency of OFDMA aggregation with K = scenario.k_devices
/// devices, the furthest at r_max:
///   K q Q / (M log2(1 + gap K P0 / (M r_max^alpha E1(g_th) N0)) e^{-g_th}) Ts.
inline double latency_digital(const SystemParams& p, const ScenarioParams& s, double r_max) {
    if (s.k_devices < 1 || s.q_dim < 1) throw DomainError("latency_digital: K and q must be >= 1");
    if (!(p.g_th > 0.0)) throw DomainError("latency_digital: g_th must be > 0");
    const double k = static_cast<double>(s.k_devices);
    const double spectral = std::log2(1.0 + mqam_snr_gap(p.ber) * digital_receive_snr(p, s.k_devices, r_max));
    return k * static_cast<double>(s.q_dim) * p.q_bits /
           (static_cast<double>(p.m) * spectral * std::exp(-p.g_th)) * p.t_s();
}

/// gamma = T_dig / T_ana.
inline double latency_reduction_ratio(const SystemParams& p, const ScenarioParams& s, double r_max) {
    return latency_digital(p, s, r_max) / latency_baa(s.q_dim, p);
}

/// Closed form K Q / (log2(1 + gap rho_k) e^{-g_th}); equals the quotient when M divides q.
inline double latency_reduction_ratio_closed_form(const SystemParams& p, std::int64_t k_devices, double r_max) {
    if (!(p.g_th > 0.0)) throw DomainError("latency_reduction_ratio_closed_form: g_th must be > 0");
    const double spectral = std::log2(1.0 + mqam_snr_gap(p.ber) * digital_receive_snr(p, k_devices, r_max));
    return static_cast<double>(k_devices) * p.q_bits / (spectral * std::exp(-p.g_th));
}

}  // namespace baa::analytics
