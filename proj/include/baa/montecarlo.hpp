#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "baa/analytics.hpp"
#include "baa/network.hpp"
#include "baa/params.hpp"
#include "baa/random.hpp"

/// Simulation oracles for the closed-form scheduling distributions. Each trial
/// draws a fresh topology from its own derived stream, so results do not depend
/// on the number of worker threads.
namespace baa::network {

/// Total-variation distance between two PMFs on a common support.
inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    const std::size_t n = std::max(p.size(), q.size());
    double tv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = i < p.size() ? p[i] : 0.0;
        const double b = i < q.size() ? q[i] : 0.0;
        tv += std::abs(a - b);
    }
    return 0.5 * tv;
}

/// Empirical distribution of the number of devices within r_in.
inline std::vector<double> empirical_k_in(std::int64_t k_devices, double r_in, double r_cell,
                                          std::size_t trials, std::uint64_t seed, unsigned workers = 0) {
    auto counts = parallel_trials(trials, [&](std::size_t t) {
        Rng rng(seed, t, "mc.k_in");
        const auto net = sample_topology(k_devices, r_cell, rng);
        const auto d = schedule(net, SchedulingScheme::cell_interior(r_in), 0);
        return d.k_in;
    }, workers);
    std::vector<double> hist(static_cast<std::size_t>(k_devices) + 1, 0.0);
    for (auto k : counts) hist[static_cast<std::size_t>(k)] += 1.0;
    for (auto& h : hist) h /= static_cast<double>(trials);
    return hist;
}

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample mean of the largest device distance.
inline double empirical_mean_max_distance(std::int64_t k_devices, double r_cell, std::size_t trials,
                                          std::uint64_t seed, unsigned workers = 0) {
    auto r = parallel_trials(trials, [&](std::size_t t) {
        Rng rng(seed, t, "mc.r_max");
        const auto net = sample_topology(k_devices, r_cell, rng);
        return schedule(net, SchedulingScheme::all_inclusive(), 0).r_max_scheduled;
    }, workers);
    return mean_of(r);
}

/// Sample mean of rho0(r_max) / N0 under all-inclusive scheduling.
inline double empirical_snr_all_inclusive(const SystemParams& p, std::int64_t k_devices, std::size_t trials,
                                          std::uint64_t seed, unsigned workers = 0) {
    auto v = parallel_trials(trials, [&](std::size_t t) {
        Rng rng(seed, t, "mc.snr_all");
        const auto net = sample_topology(k_devices, p.r_cell, rng);
        const double r_max = schedule(net, SchedulingScheme::all_inclusive(), 0).r_max_scheduled;
        return analytics::receive_snr(p, r_max);
    }, workers);
    return mean_of(v);
}

struct InteriorSnrEstimate {
    double mean_with_zeros;   ///< E[rho0 1{K_in >= 2}] / N0: the quantity the c(R_in) sum describes
    double conditional_mean;  ///< E[rho0 | K_in >= 2] / N0
    double frac_k_ge_2;       ///< fraction of draws with K_in >= 2
};

/// Monte Carlo of the cell-interior receive SNR. Draws with fewer than two
/// interior devices contribute zero.
inline InteriorSnrEstimate empirical_snr_cell_interior(const SystemParams& p, const ScenarioParams& s,
                                                       std::size_t trials, std::uint64_t seed,
                                                       unsigned workers = 0) {
    auto v = parallel_trials(trials, [&](std::size_t t) {
        Rng rng(seed, t, "mc.snr_interior");
        const auto net = sample_topology(s.k_devices, p.r_cell, rng);
        const auto d = schedule(net, SchedulingScheme::cell_interior(s.r_in), 0);
        return d.k_in >= 2 ? analytics::receive_snr(p, d.r_max_scheduled) : -1.0;
    }, workers);
    double sum = 0.0;
    std::size_t kept = 0;
    for (double x : v) {
        if (x < 0.0) continue;
        sum += x;
        ++kept;
    }
    InteriorSnrEstimate e{};
    e.mean_with_zeros = sum / static_cast<double>(trials);
    e.conditional_mean = kept ? sum / static_cast<double>(kept) : 0.0;
    e.frac_k_ge_2 = static_cast<double>(kept) / static_cast<double>(trials);
    return e;
}

struct SnrSweep {
    double all_inclusive = 0.0;                ///< E[rho0(r_max)] / N0 over the whole cell
    std::vector<InteriorSnrEstimate> interior;  ///< one entry per requested R_in
};

/// All-inclusive and cell-interior SNR estimates for several interior radii
/// from one shared set of topology draws.
inline SnrSweep empirical_snr_sweep(const SystemParams& p, std::int64_t k_devices, const std::vector<double>& r_in,
                                    std::size_t trials, std::uint64_t seed, unsigned workers = 0) {
    const std::size_t n_r = r_in.size();
    // rho0(r) / N0 = scale r^-alpha; E1(g_th) is evaluated once.
    const double scale = analytics::receive_snr(p, 1.0);
    auto snr = [&](double r) { return scale / std::pow(r, p.alpha); };
    // Per trial: all-inclusive SNR, then (SNR or -1) for each radius.
    auto rows = parallel_trials(trials, [&](std::size_t t) {
        Rng rng(seed, t, "mc.snr_sweep");
        const auto net = sample_topology(k_devices, p.r_cell, rng);
        std::vector<double> out(1 + n_r, -1.0);
        double r_all = 0.0;
        for (const auto& pos : net.positions) r_all = std::max(r_all, pos.radius);
        out[0] = snr(r_all);
        for (std::size_t j = 0; j < n_r; ++j) {
            double r_max = 0.0;
            int count = 0;
            for (const auto& pos : net.positions)
                if (pos.radius <= r_in[j]) {
                    r_max = std::max(r_max, pos.radius);
                    ++count;
                }
            if (count >= 2) out[1 + j] = snr(r_max);
        }
        return out;
    }, workers);

    SnrSweep sweep;
    sweep.interior.resize(n_r);
    std::vector<double> sums(n_r, 0.0);
    std::vector<std::size_t> kept(n_r, 0);
    for (const auto& row : rows) {
        sweep.all_inclusive += row[0];
        for (std::size_t j = 0; j < n_r; ++j)
            if (row[1 + j] >= 0.0) {
                sums[j] += row[1 + j];
                ++kept[j];
            }
    }
    const auto n = static_cast<double>(trials);
    sweep.all_inclusive /= n;
    for (std::size_t j = 0; j < n_r; ++j) {
        auto& e = sweep.interior[j];
        e.mean_with_zeros = sums[j] / n;
        e.conditional_mean = kept[j] ? sums[j] / static_cast<double>(kept[j]) : 0.0;
        e.frac_k_ge_2 = static_cast<double>(kept[j]) / n;
    }
    return sweep;
}

/// Fraction of independent runs in which every device was interior in at least
/// one of n_cr rounds of a high-mobility network.
inline double empirical_all_exploited(std::int64_t k_devices, double r_in, double r_cell, std::int64_t n_cr,
                                      std::size_t runs, std::uint64_t seed, unsigned workers = 0) {
    auto hits = parallel_trials(runs, [&](std::size_t t) {
        Rng rng(seed, t, "mc.all_exploited");
        auto net = sample_topology(k_devices, r_cell, rng, Mobility::IidResample);
        std::vector<char> seen(static_cast<std::size_t>(k_devices), 0);
        for (std::int64_t round = 0; round < n_cr; ++round) {
            if (round > 0) net = advance_round(net, rng);
            for (const auto& pos : net.positions)
                if (pos.radius <= r_in) seen[static_cast<std::size_t>(pos.device_id)] = 1;
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }) ? 1.0 : 0.0;
    }, workers);
    return mean_of(hits);
}

}  // namespace baa::network
