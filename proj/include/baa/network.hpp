#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "baa/errors.hpp"
#include "baa/format.hpp"
#include "baa/random.hpp"

namespace baa::network {

struct DevicePosition {
    std::int64_t device_id;
    double radius;  ///< distance to the edge server [m], in [0, R]
    double angle;   ///< [rad], in [0, 2 pi)
};

enum class Mobility { Static, IidResample };

inline std::string_view to_string(Mobility m) {
    return m == Mobility::Static ? "static" : "iid-resample";
}

struct NetworkRealization {
    std::vector<DevicePosition> positions;
    double r_cell = 0.0;
    std::int64_t round_index = 0;
    Mobility mobility = Mobility::Static;

    std::size_t size() const { return positions.size(); }
};

/// Draw K device positions uniformly over the disk: r = R sqrt(U), angle = 2 pi V.
inline NetworkRealization sample_topology(std::int64_t k_devices, double r_cell, Rng& rng,
                                          Mobility mobility = Mobility::Static) {
    if (k_devices < 1) throw DomainError("sample_topology: K must be >= 1");
    if (!(r_cell > 0.0)) throw DomainError("sample_topology: r_cell must be > 0");
    NetworkRealization net;
    net.r_cell = r_cell;
    net.mobility = mobility;
    net.positions.reserve(static_cast<std::size_t>(k_devices));
    for (std::int64_t k = 0; k < k_devices; ++k) {
        const double r = r_cell * std::sqrt(rng.uniform());
        const double theta = 2.0 * std::numbers::pi * rng.uniform();
        net.positions.push_back({k, r, theta});
    }
    return net;
}

inline NetworkRealization sample_topology(std::int64_t k_devices, double r_cell, std::uint64_t seed,
                                          Mobility mobility = Mobility::Static) {
    Rng rng(seed, 0, "network.topology");
    return sample_topology(k_devices, r_cell, rng, mobility);
}

/// Move to the next communication round. Static networks keep their positions;
/// high-mobility networks redraw every device independently.
inline NetworkRealization advance_round(const NetworkRealization& net, Rng& rng) {
    NetworkRealization next;
    if (net.mobility == Mobility::IidResample) {
        next = sample_topology(static_cast<std::int64_t>(net.size()), net.r_cell, rng, net.mobility);
    } else {
        next = net;
    }
    next.round_index = net.round_index + 1;
    return next;
}

enum class SchemeKind { AllInclusive, CellInterior, Alternating };

inline std::string_view to_string(SchemeKind k) {
    switch (k) {
        case SchemeKind::AllInclusive: return "all-inclusive";
        case SchemeKind::CellInterior: return "cell-interior";
        case SchemeKind::Alternating: return "alternating";
    }
    return "?";
}

struct SchedulingScheme {
    SchemeKind kind = SchemeKind::AllInclusive;
    double r_in = 0.0;         ///< interior radius; unused for all-inclusive
    std::int64_t period = 1;   ///< alternating: rounds per phase

    static SchedulingScheme all_inclusive() { return {SchemeKind::AllInclusive, 0.0, 1}; }
    static SchedulingScheme cell_interior(double r_in) { return {SchemeKind::CellInterior, r_in, 1}; }
    static SchedulingScheme alternating(double r_in, std::int64_t period = 1) {
        return {SchemeKind::Alternating, r_in, period};
    }

    /// Whether the given round uses interior-only scheduling.
    bool interior_round(std::int64_t round_index) const {
        switch (kind) {
            case SchemeKind::AllInclusive: return false;
            case SchemeKind::CellInterior: return true;
            case SchemeKind::Alternating: {
                const std::int64_t span = 2 * period;
                return ((round_index % span) + span) % span < period;
            }
        }
        return false;
    }
};

struct ScheduleDecision {
    std::vector<std::int64_t> scheduled_ids;  ///< ascending device ids
    SchedulingScheme scheme;
    double r_max_scheduled = 0.0;
    std::int64_t k_in = 0;   ///< devices within r_in (K for all-inclusive)
    bool empty = false;      ///< no device scheduled; the caller skips the round
};

/// Pure function of (positions, scheme, round index).
inline ScheduleDecision schedule(const NetworkRealization& net, const SchedulingScheme& scheme,
                                 std::int64_t round_index) {
    if (scheme.kind != SchemeKind::AllInclusive && !(scheme.r_in > 0.0))
        throw DomainError("schedule: r_in must be > 0");
    if (scheme.kind == SchemeKind::Alternating && scheme.period < 1)
        throw DomainError("schedule: alternating period must be >= 1");

    ScheduleDecision d;
    d.scheme = scheme;
    const bool interior = scheme.interior_round(round_index);
    for (const auto& pos : net.positions) {
        const bool inside = scheme.kind == SchemeKind::AllInclusive || pos.radius <= scheme.r_in;
        if (inside) ++d.k_in;
        if (!interior || inside) {
            d.scheduled_ids.push_back(pos.device_id);
            d.r_max_scheduled = std::max(d.r_max_scheduled, pos.radius);
        }
    }
    std::sort(d.scheduled_ids.begin(), d.scheduled_ids.end());
    d.empty = d.scheduled_ids.empty();
    return d;
}

/// Radii of the scheduled devices, in scheduled-id order.
inline std::vector<double> scheduled_radii(const NetworkRealization& net, const ScheduleDecision& d) {
    std::vector<double> out;
    out.reserve(d.scheduled_ids.size());
    for (auto id : d.scheduled_ids) out.push_back(net.positions[static_cast<std::size_t>(id)].radius);
    return out;
}

/// CSV snapshot: device_id,radius_m,angle_rad.
inline void write_topology_csv(std::ostream& os, const NetworkRealization& net) {
    os << "device_id,radius_m,angle_rad\n";
    for (const auto& p : net.positions)
        os << p.device_id << ',' << fmt_double(p.radius) << ',' << fmt_double(p.angle) << '\n';
}

}  // namespace baa::network
