#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "baa/analytics.hpp"
#include "baa/errors.hpp"
#include "baa/params.hpp"
#include "baa/random.hpp"
#include "baa/special.hpp"

/// Per-sub-channel simulation of one communication round: Rayleigh fading,
/// truncated channel inversion, over-the-air summation, and the OFDMA baseline.
namespace baa::phy {

using cplx = std::complex<double>;

/// Small-scale fading of K devices over M sub-channels during one OFDM symbol.
struct ChannelDraw {
    std::int64_t k_devices = 0;
    std::int64_t m = 0;
    std::vector<cplx> gains;  ///< row-major [device][sub-channel], each CN(0, 1)

    const cplx& at(std::int64_t k, std::int64_t sub) const {
        return gains[static_cast<std::size_t>(k * m + sub)];
    }
    double power(std::int64_t k, std::int64_t sub) const { return std::norm(at(k, sub)); }
};

inline ChannelDraw draw_channel(std::int64_t k_devices, std::int64_t m, Rng& rng) {
    if (k_devices < 1 || m < 1) throw DomainError("draw_channel: counts must be >= 1");
    ChannelDraw d{k_devices, m, {}};
    d.gains.resize(static_cast<std::size_t>(k_devices * m));
    for (auto& g : d.gains) g = rng.complex_normal(1.0);
    return d;
}

/// Independent draws for n_symbols consecutive OFDM symbols (fast fading across symbols).
inline std::vector<ChannelDraw> draw_channels(std::int64_t k_devices, std::int64_t m, std::int64_t n_symbols, Rng& rng) {
    if (n_symbols < 1) throw DomainError("draw_channels: n_symbols must be >= 1");
    std::vector<ChannelDraw> out;
    out.reserve(static_cast<std::size_t>(n_symbols));
    for (std::int64_t t = 0; t < n_symbols; ++t) out.push_back(draw_channel(k_devices, m, rng));
    return out;
}

/// Truncated channel inversion aligned to a common receive amplitude sqrt(rho0).
struct PowerPolicy {
    double rho0 = 0.0;
    double g_th = 0.0;
    double alpha = 0.0;
    std::vector<double> distances;

    /// Pre-equalizer sqrt(rho0) r^{alpha/2} / h, or zero when |h|^2 < g_th.
    cplx coefficient(std::size_t k, cplx h) const {
        if (std::norm(h) < g_th) return {0.0, 0.0};
        return std::sqrt(rho0) * std::pow(distances[k], alpha / 2.0) / h;
    }
    /// Expected per-symbol transmit power summed over M sub-channels: M rho0 r^alpha E1(g_th).
    double expected_power(std::size_t k, std::int64_t m) const {
        return static_cast<double>(m) * rho0 * std::pow(distances[k], alpha) * exp_integral(g_th);
    }
};

/// Align every scheduled device to the furthest one, which transmits at its full budget.
inline PowerPolicy align_rho0(std::span<const double> distances, const SystemParams& p) {
    if (distances.empty()) throw DomainError("align_rho0: scheduled set is empty");
    if (!(p.g_th > 0.0)) throw DomainError("align_rho0: g_th must be > 0 (E1 diverges at 0)");
    const double r_max = *std::max_element(distances.begin(), distances.end());
    PowerPolicy policy;
    policy.rho0 = analytics::aligned_receive_power(p, r_max);
    policy.g_th = p.g_th;
    policy.alpha = p.alpha;
    policy.distances.assign(distances.begin(), distances.end());
    return policy;
}

/// A device's update as transmitted: values plus the sub-channel survival mask.
struct UpdateVector {
    std::vector<double> values;
    std::vector<std::uint8_t> truncation_mask;  ///< 1 = transmitted, 0 = cut off

    double truncated_fraction() const {
        if (truncation_mask.empty()) return 0.0;
        std::size_t cut = 0;
        for (auto b : truncation_mask) cut += b == 0;
        return static_cast<double>(cut) / static_cast<double>(truncation_mask.size());
    }
};

/// Shared affine normalization so transmitted symbols have zero mean and unit variance.
/// The server derives it from the model it broadcasts; every device uses the same factors.
struct NormalizationSpec {
    double mean = 0.0;
    double std = 1.0;

    static NormalizationSpec from_model(std::span<const double> model) {
        NormalizationSpec spec;
        if (model.empty()) return spec;
        double sum = 0.0;
        for (double v : model) sum += v;
        spec.mean = sum / static_cast<double>(model.size());
        double ss = 0.0;
        for (double v : model) ss += (v - spec.mean) * (v - spec.mean);
        spec.std = std::sqrt(ss / static_cast<double>(model.size()));
        if (!(spec.std > 0.0) || !std::isfinite(spec.std)) {
            warn("NormalizationSpec: degenerate model spread, falling back to std = 1");
            spec.std = 1.0;
        }
        return spec;
    }
};

inline std::vector<std::vector<double>> normalize_updates(const std::vector<std::vector<double>>& raw,
                                                          const NormalizationSpec& spec) {
    if (!(spec.std > 0.0)) throw DomainError("normalize_updates: std must be > 0");
    std::vector<std::vector<double>> out;
    out.reserve(raw.size());
    for (const auto& u : raw) {
        std::vector<double> n(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) n[i] = (u[i] - spec.mean) / spec.std;
        out.push_back(std::move(n));
    }
    return out;
}

/// Map a normalized aggregate back to model space. `count` is the number of
/// updates the aggregate sums (1 when it is already an average).
inline std::vector<double> denormalize(std::span<const double> aggregate, const NormalizationSpec& spec,
                                       double count = 1.0) {
    std::vector<double> out(aggregate.size());
    for (std::size_t i = 0; i < aggregate.size(); ++i) out[i] = aggregate[i] * spec.std + count * spec.mean;
    return out;
}

struct BaaOptions {
    bool fading = true;   ///< false: every h = 1 (no fading, no cutoff below g_th <= 1)
    bool genie = false;   ///< divide each entry by its true contributor count instead of |K|
};

struct BaaDiagnostics {
    double rho0 = 0.0;
    double snr = 0.0;  ///< rho0 / N0 (infinite when N0 = 0)
    double r_max = 0.0;
    std::int64_t n_symbols = 0;
    double latency_s = 0.0;
    std::vector<double> truncation_fraction;  ///< per scheduled device
    std::vector<double> transmit_power;       ///< per device: M * mean |p|^2 over carried parameters [W]
    double max_amplitude_error = 0.0;         ///< max | |r^{-a/2} h p| - sqrt(rho0) | / sqrt(rho0)

    double mean_truncation() const {
        if (truncation_fraction.empty()) return 0.0;
        double s = 0.0;
        for (double f : truncation_fraction) s += f;
        return s / static_cast<double>(truncation_fraction.size());
    }
};

struct BaaRoundResult {
    std::vector<double> aggregate;          ///< normalized-domain average estimate
    std::vector<UpdateVector> transmitted;  ///< per device, with its truncation mask
    BaaDiagnostics diagnostics;
};

/// One round of broadband analog aggregation.
///
/// Parameter i rides sub-channel i mod M of OFDM symbol i / M. Each device
/// pre-inverts its channel by truncated inversion, the channel sums the
/// aligned symbols, and the server adds the real part of CN(0, N0) noise before
/// scaling by 1 / (sqrt(rho0) |K|). N0 = 0 is accepted for noiseless studies.
inline BaaRoundResult baa_round(const std::vector<std::vector<double>>& updates, std::span<const double> distances,
                                const SystemParams& p, Rng& rng, BaaOptions opts = {}) {
    if (updates.empty()) throw DomainError("baa_round: no updates");
    if (updates.size() != distances.size()) throw DomainError("baa_round: one distance per update required");
    const std::size_t q = updates.front().size();
    if (q == 0) throw DomainError("baa_round: empty update");
    for (const auto& u : updates)
        if (u.size() != q) throw DomainError("baa_round: update dimension mismatch");
    if (!(p.n0 >= 0.0)) throw DomainError("baa_round: n0 must be >= 0");

    const auto k_count = static_cast<std::int64_t>(updates.size());
    const PowerPolicy policy = align_rho0(distances, p);
    const double amp = std::sqrt(policy.rho0);
    const double noise_std = std::sqrt(p.n0 / 2.0);
    const std::int64_t n_symbols = analytics::ofdm_symbols(static_cast<std::int64_t>(q), p.m);

    std::vector<double> path_amp(updates.size());
    for (std::size_t k = 0; k < updates.size(); ++k) path_amp[k] = std::pow(distances[k], -p.alpha / 2.0);

    BaaRoundResult res;
    res.aggregate.assign(q, 0.0);
    res.transmitted.resize(updates.size());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        res.transmitted[k].values.assign(q, 0.0);
        res.transmitted[k].truncation_mask.assign(q, 0);
    }
    std::vector<double> power_sum(updates.size(), 0.0);
    double max_amp_err = 0.0;

    for (std::int64_t t = 0; t < n_symbols; ++t) {
        ChannelDraw ch;
        if (opts.fading) {
            ch = draw_channel(k_count, p.m, rng);
        } else {
            ch = ChannelDraw{k_count, p.m, std::vector<cplx>(static_cast<std::size_t>(k_count * p.m), cplx{1.0, 0.0})};
        }
        const auto first = static_cast<std::size_t>(t * p.m);
        const auto last = std::min(q, first + static_cast<std::size_t>(p.m));
        for (std::size_t i = first; i < last; ++i) {
            const auto sub = static_cast<std::int64_t>(i - first);
            double rx = 0.0;
            int contributors = 0;
            for (std::size_t k = 0; k < updates.size(); ++k) {
                const cplx h = ch.at(static_cast<std::int64_t>(k), sub);
                const cplx pre = policy.coefficient(k, h);
                power_sum[k] += std::norm(pre);
                if (pre == cplx{0.0, 0.0}) continue;
                const cplx gain = path_amp[k] * h * pre;
                max_amp_err = std::max(max_amp_err, std::abs(std::abs(gain) - amp) / amp);
                rx += (gain * updates[k][i]).real();
                res.transmitted[k].values[i] = updates[k][i];
                res.transmitted[k].truncation_mask[i] = 1;
                ++contributors;
            }
            if (noise_std > 0.0) rx += noise_std * rng.normal();
            const double divisor = opts.genie && contributors > 0 ? contributors : static_cast<double>(k_count);
            res.aggregate[i] = rx / (amp * divisor);
        }
    }

    auto& diag = res.diagnostics;
    diag.rho0 = policy.rho0;
    diag.snr = p.n0 > 0.0 ? policy.rho0 / p.n0 : std::numeric_limits<double>::infinity();
    diag.r_max = *std::max_element(distances.begin(), distances.end());
    diag.n_symbols = n_symbols;
    diag.latency_s = static_cast<double>(n_symbols) * p.t_s();
    diag.max_amplitude_error = max_amp_err;
    for (std::size_t k = 0; k < updates.size(); ++k) {
        diag.truncation_fraction.push_back(res.transmitted[k].truncated_fraction());
        diag.transmit_power.push_back(static_cast<double>(p.m) * power_sum[k] / static_cast<double>(q));
    }
    return res;
}

/// Uniform Q-bit quantizer over [lo, hi]; the range travels as side information.
struct UniformQuantizer {
    double lo = 0.0;
    double hi = 0.0;
    int bits = 16;

    std::uint64_t levels() const { return bits >= 64 ? ~0ULL : ((1ULL << bits) - 1ULL); }

    std::uint64_t encode(double x) const {
        if (!(hi > lo)) return 0;
        const double scaled = (x - lo) / (hi - lo) * static_cast<double>(levels());
        const double clamped = std::clamp(std::round(scaled), 0.0, static_cast<double>(levels()));
        return static_cast<std::uint64_t>(clamped);
    }
    double decode(std::uint64_t code) const {
        if (!(hi > lo)) return lo;
        return lo + static_cast<double>(code) * (hi - lo) / static_cast<double>(levels());
    }
};

struct DigitalOptions {
    bool bit_flips = false;  ///< flip each transmitted bit independently with probability BER
};

struct DigitalRoundResult {
    std::vector<double> aggregate;       ///< mean of the dequantized updates
    std::vector<double> device_latency;  ///< q Q / R_k per scheduled device [s]
    double round_latency = 0.0;          ///< straggler: max over devices [s]
    UniformQuantizer quantizer;
};

/// One round of OFDMA digital aggregation: quantize, upload over M/K sub-channels
/// each, average at the server. Delivery is error-free unless bit flips are enabled.
inline DigitalRoundResult digital_round(const std::vector<std::vector<double>>& updates,
                                        std::span<const double> distances, const SystemParams& p, Rng& rng,
                                        DigitalOptions opts = {}) {
    if (updates.empty()) throw DomainError("digital_round: no updates");
    if (updates.size() != distances.size()) throw DomainError("digital_round: one distance per update required");
    const std::size_t q = updates.front().size();
    for (const auto& u : updates)
        if (u.size() != q) throw DomainError("digital_round: update dimension mismatch");

    DigitalRoundResult res;
    res.quantizer.bits = p.q_bits;
    res.quantizer.lo = std::numeric_limits<double>::infinity();
    res.quantizer.hi = -std::numeric_limits<double>::infinity();
    for (const auto& u : updates)
        for (double v : u) {
            res.quantizer.lo = std::min(res.quantizer.lo, v);
            res.quantizer.hi = std::max(res.quantizer.hi, v);
        }

    res.aggregate.assign(q, 0.0);
    for (const auto& u : updates) {
        for (std::size_t i = 0; i < q; ++i) {
            std::uint64_t code = res.quantizer.encode(u[i]);
            if (opts.bit_flips) {
                for (int b = 0; b < p.q_bits; ++b)
                    if (rng.uniform() < p.ber) code ^= (1ULL << b);
            }
            res.aggregate[i] += res.quantizer.decode(code);
        }
    }
    for (auto& v : res.aggregate) v /= static_cast<double>(updates.size());

    const auto k_count = static_cast<std::int64_t>(updates.size());
    for (double r : distances) {
        const double t = analytics::latency_digital_device(p, k_count, static_cast<std::int64_t>(q), r);
        res.device_latency.push_back(t);
        res.round_latency = std::max(res.round_latency, t);
    }
    return res;
}

/// Sample mean of a device's OFDMA sum rate over independent Rayleigh draws of its
/// M/K sub-channels (the instantaneous-rate law, averaged empirically).
inline double empirical_rate_digital(const SystemParams& p, std::int64_t k_devices, double r_k, std::size_t draws,
                                     Rng& rng) {
    const double m_k = static_cast<double>(p.m) / static_cast<double>(k_devices);
    double sum = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double g = std::norm(rng.complex_normal(1.0));
        sum += analytics::rate_digital_instantaneous(p, k_devices, r_k, g);
    }
    return m_k * sum / static_cast<double>(draws);
}

}  // namespace baa::phy
