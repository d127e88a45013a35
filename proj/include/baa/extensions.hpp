#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "baa/errors.hpp"
#include "baa/format.hpp"
#include "baa/random.hpp"

namespace baa::extensions {

// ---------------------------------------------------------------------------
// Direct-sequence spread spectrum

/// Pseudorandom +/-1 chip sequence shared by the legitimate devices.
struct SpreadingCode {
    std::vector<int> chips;

    std::size_t gamma() const { return chips.size(); }

    static SpreadingCode pseudorandom(std::size_t gamma, Rng& rng) {
        if (gamma < 1) throw DomainError("SpreadingCode: gamma must be >= 1");
        SpreadingCode c;
        c.chips.resize(gamma);
        for (auto& x : c.chips) x = (rng() >> 63) ? 1 : -1;
        return c;
    }
};

inline void check_code(const SpreadingCode& code) {
    if (code.chips.empty()) throw DomainError("spreading code is empty");
    for (int c : code.chips)
        if (c != 1 && c != -1) throw DomainError("spreading code chips must be +1 or -1");
}

/// Each symbol occupies gamma chip slots: out[n*gamma + j] = x[n] c[j].
inline std::vector<double> spread(std::span<const double> symbols, const SpreadingCode& code) {
    check_code(code);
    const std::size_t g = code.gamma();
    std::vector<double> out(symbols.size() * g);
    for (std::size_t n = 0; n < symbols.size(); ++n)
        for (std::size_t j = 0; j < g; ++j) out[n * g + j] = code.chips[j] * symbols[n];
    return out;
}

/// Correlate with the code and divide by gamma. The running mean makes the
/// round trip exact: identical chip products leave the mean unchanged.
inline std::vector<double> despread(std::span<const double> chips, const SpreadingCode& code) {
    check_code(code);
    const std::size_t g = code.gamma();
    if (chips.size() % g != 0) throw DomainError("despread: chip count is not a multiple of gamma");
    std::vector<double> out(chips.size() / g);
    for (std::size_t n = 0; n < out.size(); ++n) {
        double mean = 0.0;
        for (std::size_t j = 0; j < g; ++j) {
            const double v = code.chips[j] * chips[n * g + j];
            mean += (v - mean) / static_cast<double>(j + 1);
        }
        out[n] = mean;
    }
    return out;
}

/// Channel uses needed for n symbols with spreading factor gamma.
inline std::int64_t dsss_symbol_count(std::int64_t n_symbols, std::int64_t gamma) { return n_symbols * gamma; }

/// Over-the-air sum of legitimate chip streams (all aligned, noiseless).
inline std::vector<double> superpose(const std::vector<std::vector<double>>& streams) {
    if (streams.empty()) throw DomainError("superpose: no streams");
    std::vector<double> out(streams.front().size(), 0.0);
    for (const auto& s : streams) {
        if (s.size() != out.size()) throw DomainError("superpose: length mismatch");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
    }
    return out;
}

struct SuppressionResult {
    std::vector<double> aggregate;     ///< despread legitimate sum plus residual interference
    double interference_unspread = 0;  ///< adversary power per symbol without spreading
    double interference_despread = 0;  ///< residual adversary power per symbol after despreading
    double suppression_ratio = 0;      ///< unspread / despread, ~ gamma
};

/// Legitimate devices spread with the shared code; an adversary unaware of it
/// injects white Gaussian noise of the given power per channel use. The same
/// adversary at symbol rate without spreading is the reference.
inline SuppressionResult adversary_suppression_trial(const std::vector<std::vector<double>>& legit, double adversary_power,
                                                     const SpreadingCode& code, Rng& rng) {
    if (legit.empty()) throw DomainError("adversary_suppression_trial: no legitimate devices");
    if (!(adversary_power >= 0.0)) throw DomainError("adversary_suppression_trial: power must be >= 0");
    const std::size_t n = legit.front().size();
    std::vector<std::vector<double>> spread_streams;
    spread_streams.reserve(legit.size());
    for (const auto& u : legit) {
        if (u.size() != n) throw DomainError("adversary_suppression_trial: length mismatch");
        spread_streams.push_back(spread(u, code));
    }
    auto rx = superpose(spread_streams);
    const double amp = std::sqrt(adversary_power);
    for (auto& v : rx) v += amp * rng.normal();

    std::vector<double> plain(n, 0.0);
    for (const auto& u : legit)
        for (std::size_t i = 0; i < n; ++i) plain[i] += u[i];

    SuppressionResult res;
    res.aggregate = despread(rx, code);
    double resid = 0.0, unspread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = res.aggregate[i] - plain[i];
        resid += e * e;
        const double a = amp * rng.normal();
        unspread += a * a;
    }
    res.interference_despread = resid / static_cast<double>(n);
    res.interference_unspread = unspread / static_cast<double>(n);
    res.suppression_ratio = res.interference_despread > 0.0 ? res.interference_unspread / res.interference_despread : 0.0;
    return res;
}

struct SuppressionSummary {
    std::size_t gamma = 1;
    std::size_t trials = 0;
    double mean_unspread = 0;
    double mean_despread = 0;
    double ratio = 0;          ///< mean_unspread / mean_despread
    double max_aggregate_error = 0;  ///< worst legit-aggregate deviation with the adversary silent
    std::int64_t symbols_plain = 0;
    std::int64_t symbols_spread = 0;
};

/// Repeated suppression trials with fresh codes and updates per trial.
/// Averaging the interference powers first keeps the ratio estimator stable.
inline SuppressionSummary suppression_experiment(std::size_t gamma, double adversary_power, std::size_t n_devices,
                                                 std::size_t n_symbols, std::size_t trials, std::uint64_t seed) {
    if (trials < 1 || n_devices < 1 || n_symbols < 1) throw DomainError("suppression_experiment: empty experiment");
    struct Row { double unspread, despread, agg_err; };
    auto rows = parallel_trials(trials, [&](std::size_t t) {
        Rng rng(seed, t, "ext.dsss");
        const auto code = SpreadingCode::pseudorandom(gamma, rng);
        std::vector<std::vector<double>> legit(n_devices, std::vector<double>(n_symbols));
        for (auto& u : legit)
            for (auto& v : u) v = rng.normal();
        auto r = adversary_suppression_trial(legit, adversary_power, code, rng);
        auto quiet = adversary_suppression_trial(legit, 0.0, code, rng);
        double err = 0.0;
        for (std::size_t i = 0; i < n_symbols; ++i) {
            double sum = 0.0;
            for (const auto& u : legit) sum += u[i];
            err = std::max(err, std::abs(quiet.aggregate[i] - sum));
        }
        return Row{r.interference_unspread, r.interference_despread, err};
    });
    SuppressionSummary s;
    s.gamma = gamma;
    s.trials = trials;
    for (const auto& r : rows) {
        s.mean_unspread += r.unspread;
        s.mean_despread += r.despread;
        s.max_aggregate_error = std::max(s.max_aggregate_error, r.agg_err);
    }
    s.mean_unspread /= static_cast<double>(trials);
    s.mean_despread /= static_cast<double>(trials);
    s.ratio = s.mean_despread > 0.0 ? s.mean_unspread / s.mean_despread : 0.0;
    s.symbols_plain = static_cast<std::int64_t>(n_symbols);
    s.symbols_spread = dsss_symbol_count(s.symbols_plain, static_cast<std::int64_t>(gamma));
    return s;
}

// ---------------------------------------------------------------------------
// Multi-antenna beamforming

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct BeamProblem {
    CMatrix h_matrix;                  ///< N x K channel vectors, one column per device
    std::vector<std::size_t> weak_set;  ///< columns targeted by aggregation beamforming
    double n0 = 1.0;

    std::size_t n_antennas() const { return static_cast<std::size_t>(h_matrix.rows()); }
    std::size_t k_devices() const { return static_cast<std::size_t>(h_matrix.cols()); }

    CMatrix weak_channels() const {
        CMatrix out(h_matrix.rows(), static_cast<Eigen::Index>(weak_set.size()));
        for (std::size_t i = 0; i < weak_set.size(); ++i) {
            if (weak_set[i] >= k_devices()) throw DomainError("BeamProblem: weak-set index out of range");
            out.col(static_cast<Eigen::Index>(i)) = h_matrix.col(static_cast<Eigen::Index>(weak_set[i]));
        }
        return out;
    }
};

/// Rayleigh channel matrix with i.i.d. CN(0, 1) entries.
inline CMatrix rayleigh_channels(std::size_t n_antennas, std::size_t k_devices, Rng& rng) {
    CMatrix h(static_cast<Eigen::Index>(n_antennas), static_cast<Eigen::Index>(k_devices));
    for (Eigen::Index c = 0; c < h.cols(); ++c)
        for (Eigen::Index r = 0; r < h.rows(); ++r) h(r, c) = rng.complex_normal(1.0);
    return h;
}

/// Tr(F^H A F) / (N0 Tr(F^H F)) with A = H~ H~^H.
inline double aggregation_objective(const CMatrix& f, const CMatrix& weak, double n0) {
    const double num = (f.adjoint() * weak * weak.adjoint() * f).trace().real();
    const double den = n0 * (f.adjoint() * f).trace().real();
    return num / den;
}

struct AggregationBeam {
    CMatrix f;                  ///< N x rank, orthonormal columns
    double objective = 0.0;
    int iterations = 0;
    bool degenerate = false;    ///< H~ is zero: every F is optimal with objective 0
};

/// Unconstrained SNR maximization over F: the principal eigen-subspace of
/// H~ H~^H, found by orthogonal (power) iteration to tolerance `tol`.
inline AggregationBeam aggregation_beamformer(const BeamProblem& prob, std::size_t rank = 1, double tol = 1e-10,
                                              int max_iter = 100000) {
    if (prob.n_antennas() < 1) throw DomainError("aggregation_beamformer: need N >= 1");
    if (prob.weak_set.empty()) throw DomainError("aggregation_beamformer: weak set is empty");
    if (rank < 1 || rank > prob.n_antennas()) throw DomainError("aggregation_beamformer: rank must lie in [1, N]");
    const CMatrix weak = prob.weak_channels();
    const CMatrix a = weak * weak.adjoint();
    const auto n = static_cast<Eigen::Index>(prob.n_antennas());
    const auto r = static_cast<Eigen::Index>(rank);

    AggregationBeam out;
    if (a.norm() == 0.0) {
        out.degenerate = true;
        out.f = CMatrix::Identity(n, r);
        return out;
    }

    // Start from the strongest weak channels, padded with unit vectors.
    CMatrix v = CMatrix::Zero(n, r);
    for (Eigen::Index c = 0; c < r; ++c) {
        if (c < weak.cols()) v.col(c) = weak.col(c);
        v(c % n, c) += 1.0;
    }
    Eigen::HouseholderQR<CMatrix> qr(v);
    v = qr.householderQ() * CMatrix::Identity(n, r);

    double prev = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        CMatrix w = a * v;
        Eigen::HouseholderQR<CMatrix> step(w);
        CMatrix next = step.householderQ() * CMatrix::Identity(n, r);
        // Distance between subspaces, insensitive to per-column phase.
        const double gap = (next - v * (v.adjoint() * next)).norm();
        v = std::move(next);
        const double obj = (v.adjoint() * a * v).trace().real() / static_cast<double>(r);
        out.iterations = it;
        if (gap < tol || std::abs(obj - prev) <= tol * tol * std::abs(obj)) break;
        prev = obj;
    }
    out.f = v;
    out.objective = aggregation_objective(v, weak, prob.n0);
    return out;
}

struct SdmaBeam {
    std::optional<CVector> f;    ///< unit-norm zero-forcing beam, empty when infeasible
    double objective = 0.0;      ///< |f^H h_k|^2 / (sum_g |f^H h_g|^2 + N0)
    double max_residual = 0.0;   ///< max_{g != k} |f^H h_g|
    std::string reason;          ///< why the user is infeasible
};

struct SdmaResult {
    bool feasible = false;  ///< every user received a beam
    std::string reason;
    std::vector<SdmaBeam> beams;
};

/// Zero-forcing beams: f_k is h_k projected onto the orthogonal complement of
/// the other users' channels. Needs N >= K degrees of freedom; users whose
/// channel lies in the span of the others are flagged individually.
inline SdmaResult sdma_beamformer(const BeamProblem& prob, double rank_tol = 1e-10) {
    SdmaResult res;
    const auto n = static_cast<Eigen::Index>(prob.n_antennas());
    const auto k = static_cast<Eigen::Index>(prob.k_devices());
    res.beams.resize(static_cast<std::size_t>(k));
    if (n < k) {
        res.reason = "insufficient degrees of freedom: zero-forcing needs N >= K antennas (N = " +
                     std::to_string(n) + ", K = " + std::to_string(k) + ")";
        for (auto& b : res.beams) b.reason = res.reason;
        return res;
    }
    res.feasible = true;
    for (Eigen::Index user = 0; user < k; ++user) {
        SdmaBeam& beam = res.beams[static_cast<std::size_t>(user)];
        const CVector h = prob.h_matrix.col(user);
        CVector f = h;
        if (k > 1) {
            CMatrix others(n, k - 1);
            for (Eigen::Index g = 0, c = 0; g < k; ++g)
                if (g != user) others.col(c++) = prob.h_matrix.col(g);
            Eigen::ColPivHouseholderQR<CMatrix> qr(others);
            qr.setThreshold(rank_tol);
            const CMatrix basis = CMatrix(qr.householderQ()).leftCols(qr.rank());
            f = h - basis * (basis.adjoint() * h);
            // Second pass removes the residual the first projection leaves behind.
            f -= basis * (basis.adjoint() * f);
        }
        const double h_norm = h.norm();
        if (h_norm == 0.0 || f.norm() <= rank_tol * h_norm) {
            beam.reason = "channel lies in the span of the other users";
            res.feasible = false;
            continue;
        }
        f /= f.norm();
        double interference = 0.0;
        for (Eigen::Index g = 0; g < k; ++g) {
            if (g == user) continue;
            const double leak = std::abs(f.dot(prob.h_matrix.col(g)));
            beam.max_residual = std::max(beam.max_residual, leak);
            interference += leak * leak;
        }
        beam.objective = std::norm(f.dot(h)) / (interference + prob.n0);
        beam.f = f;
    }
    if (!res.feasible) res.reason = "rank-deficient channel set";
    return res;
}

/// Array gain |f^H a(theta)|^2 of a half-wavelength uniform linear array.
inline double array_gain(const CVector& f, double theta) {
    CVector a(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i)
        a(i) = std::polar(1.0, std::numbers::pi * static_cast<double>(i) * std::sin(theta));
    return std::norm(f.dot(a));
}

/// Steering-vector channels for devices at the given angles (line-of-sight ULA).
inline CMatrix ula_channels(std::size_t n_antennas, std::span<const double> angles) {
    CMatrix h(static_cast<Eigen::Index>(n_antennas), static_cast<Eigen::Index>(angles.size()));
    for (Eigen::Index c = 0; c < h.cols(); ++c)
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            h(i, c) = std::polar(1.0, std::numbers::pi * static_cast<double>(i) * std::sin(angles[static_cast<std::size_t>(c)]));
    return h;
}

/// (angle, gain) rows over [-pi/2, pi/2] for polar plots.
inline void write_beam_pattern_csv(std::ostream& os, const CVector& f, std::size_t points = 361) {
    if (points < 2) throw DomainError("write_beam_pattern_csv: need >= 2 points");
    os << "angle_rad,gain\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double th = -std::numbers::pi / 2 + std::numbers::pi * static_cast<double>(i) / static_cast<double>(points - 1);
        os << fmt_double(th) << ',' << fmt_double(array_gain(f, th)) << '\n';
    }
}

}  // namespace baa::extensions
