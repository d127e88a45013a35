#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "baa/analytics.hpp"
#include "baa/errors.hpp"
#include "baa/network.hpp"
#include "baa/params.hpp"
#include "baa/phy.hpp"
#include "baa/random.hpp"

/// Federated averaging of a multinomial logistic-regression model with a
/// pluggable aggregation channel (ideal, analog over-the-air, digital OFDMA).
namespace baa::learning {

struct ModelParams {
    std::vector<double> weights;
};

enum class Provenance { MnistIdx, Synthetic };

struct LabeledDataset {
    std::vector<double> features;  ///< row-major N x dim
    std::vector<int> labels;
    std::size_t dim = 0;
    int classes = 0;
    Provenance provenance = Provenance::Synthetic;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
};

/// Shape of a softmax-regression model: a classes x dim weight block followed by classes biases.
struct SoftmaxModel {
    std::size_t dim = 0;
    int classes = 0;

    std::size_t param_count() const { return static_cast<std::size_t>(classes) * (dim + 1); }
    ModelParams zeros() const { return {std::vector<double>(param_count(), 0.0)}; }

    void logits(std::span<const double> w, std::span<const double> x, std::span<double> out) const {
        const auto c_count = static_cast<std::size_t>(classes);
        const std::size_t bias = c_count * dim;
        for (std::size_t c = 0; c < c_count; ++c) {
            double z = w[bias + c];
            const double* wc = w.data() + c * dim;
            for (std::size_t j = 0; j < dim; ++j) z += wc[j] * x[j];
            out[c] = z;
        }
    }
};

inline SoftmaxModel model_for(const LabeledDataset& d) { return {d.dim, d.classes}; }

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Mean cross-entropy over the selected samples and its gradient.
inline LossGradient loss_and_gradient(const SoftmaxModel& model, std::span<const double> w, const LabeledDataset& data,
                                      std::span<const std::size_t> indices) {
    if (indices.empty()) throw DomainError("loss_and_gradient: empty sample set");
    if (w.size() != model.param_count()) throw DomainError("loss_and_gradient: model dimension mismatch");
    const auto c_count = static_cast<std::size_t>(model.classes);
    const std::size_t bias = c_count * model.dim;
    LossGradient out;
    out.gradient.assign(w.size(), 0.0);
    std::vector<double> z(c_count);
    for (std::size_t idx : indices) {
        const auto x = data.row(idx);
        const auto y = static_cast<std::size_t>(data.labels[idx]);
        model.logits(w, x, z);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (auto& v : z) {
            v = std::exp(v - zmax);
            denom += v;
        }
        out.loss += std::log(denom) - std::log(z[y]);
        for (std::size_t c = 0; c < c_count; ++c) {
            const double resid = z[c] / denom - (c == y ? 1.0 : 0.0);
            double* gc = out.gradient.data() + c * model.dim;
            for (std::size_t j = 0; j < model.dim; ++j) gc[j] += resid * x[j];
            out.gradient[bias + c] += resid;
        }
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    out.loss *= inv;
    for (auto& g : out.gradient) g *= inv;
    return out;
}

/// F_k(w): mean sample-wise cross-entropy over one device's shard.
inline double local_loss(const SoftmaxModel& model, std::span<const double> w, const LabeledDataset& data,
                         std::span<const std::size_t> shard) {
    if (shard.empty()) throw DomainError("local_loss: empty shard");
    return loss_and_gradient(model, w, data, shard).loss;
}

/// F(w) = (1/K) sum_k F_k(w), valid because every shard has the same size.
inline double global_loss(const SoftmaxModel& model, std::span<const double> w, const LabeledDataset& data,
                          const std::vector<std::vector<std::size_t>>& shards) {
    if (shards.empty()) throw DomainError("global_loss: no shards");
    double sum = 0.0;
    for (const auto& s : shards) sum += local_loss(model, w, data, s);
    return sum / static_cast<double>(shards.size());
}

inline double accuracy(const SoftmaxModel& model, std::span<const double> w, const LabeledDataset& data) {
    if (data.size() == 0) return 0.0;
    std::vector<double> z(static_cast<std::size_t>(model.classes));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        model.logits(w, data.row(i), z);
        const auto pred = std::distance(z.begin(), std::max_element(z.begin(), z.end()));
        correct += pred == data.labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline double dataset_loss(const SoftmaxModel& model, std::span<const double> w, const LabeledDataset& data) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return loss_and_gradient(model, w, data, all).loss;
}

/// tau steps of minibatch SGD starting from the broadcast model. A batch size
/// at least the shard size means full-batch gradient descent (no randomness).
inline ModelParams local_sgd(const SoftmaxModel& model, std::span<const double> start, const LabeledDataset& data,
                             std::span<const std::size_t> shard, double eta, int tau, std::size_t batch_size, Rng& rng) {
    if (shard.empty()) throw DomainError("local_sgd: empty shard");
    if (tau < 1) throw DomainError("local_sgd: tau must be >= 1");
    if (batch_size == 0) throw DomainError("local_sgd: batch_size must be >= 1");
    ModelParams w{std::vector<double>(start.begin(), start.end())};
    std::vector<std::size_t> pool(shard.begin(), shard.end());
    std::vector<std::size_t> batch;
    for (int step = 0; step < tau; ++step) {
        std::span<const std::size_t> used = pool;
        if (batch_size < pool.size()) {
            // partial Fisher-Yates: the first batch_size entries form a uniform sample
            for (std::size_t i = 0; i < batch_size; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            batch.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(batch_size));
            used = batch;
        }
        const auto lg = loss_and_gradient(model, w.weights, data, used);
        for (std::size_t i = 0; i < w.weights.size(); ++i) w.weights[i] -= eta * lg.gradient[i];
    }
    return w;
}

/// Coordinate-wise arithmetic mean of the local models, reduced in input order.
inline ModelParams global_average(const std::vector<ModelParams>& models) {
    if (models.empty()) throw DomainError("global_average: no models");
    const std::size_t q = models.front().weights.size();
    ModelParams out{std::vector<double>(q, 0.0)};
    for (const auto& m : models) {
        if (m.weights.size() != q) throw DomainError("global_average: dimension mismatch");
        for (std::size_t i = 0; i < q; ++i) out.weights[i] += m.weights[i];
    }
    for (auto& v : out.weights) v /= static_cast<double>(models.size());
    return out;
}

// ---------------------------------------------------------------------------
// Data partitioning

enum class PartitionMode { Iid, NoniidShards };

struct PartitionSpec {
    PartitionMode mode = PartitionMode::Iid;
    std::size_t shards_total = 40;
    std::size_t shard_size = 50;
    std::size_t shards_per_device = 2;
};

/// Split the training set over K devices with equal local dataset sizes.
///
/// IID: shuffle and deal floor(N/K) samples to each device. Non-IID: draw
/// shards_total * shard_size samples, sort them by label, cut equal shards and
/// hand each device shards_per_device of them at random.
inline std::vector<std::vector<std::size_t>> partition(const LabeledDataset& data, const PartitionSpec& spec,
                                                       std::int64_t k_devices, Rng& rng) {
    if (k_devices < 1) throw DomainError("partition: K must be >= 1");
    const auto k = static_cast<std::size_t>(k_devices);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> shards(k);

    if (spec.mode == PartitionMode::Iid) {
        const std::size_t per = data.size() / k;
        if (per == 0) throw DomainError("partition: fewer samples than devices");
        for (std::size_t d = 0; d < k; ++d)
            shards[d].assign(order.begin() + static_cast<std::ptrdiff_t>(d * per),
                             order.begin() + static_cast<std::ptrdiff_t>((d + 1) * per));
        return shards;
    }

    if (spec.shard_size == 0 || spec.shards_per_device == 0) throw DomainError("partition: shard sizes must be >= 1");
    if (spec.shards_total * spec.shard_size > data.size())
        throw DomainError("partition: shards_total * shard_size exceeds the dataset size");
    if (spec.shards_total < k * spec.shards_per_device)
        throw DomainError("partition: not enough shards for K devices");
    order.resize(spec.shards_total * spec.shard_size);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.labels[a] < data.labels[b]; });
    std::vector<std::size_t> shard_ids(spec.shards_total);
    std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
    rng.shuffle(shard_ids);
    for (std::size_t d = 0; d < k; ++d) {
        for (std::size_t s = 0; s < spec.shards_per_device; ++s) {
            const std::size_t id = shard_ids[d * spec.shards_per_device + s];
            const auto from = order.begin() + static_cast<std::ptrdiff_t>(id * spec.shard_size);
            shards[d].insert(shards[d].end(), from, from + static_cast<std::ptrdiff_t>(spec.shard_size));
        }
    }
    return shards;
}

// ---------------------------------------------------------------------------
// Datasets

/// Isotropic unit-variance Gaussian classes. Class c is centred at
/// (separation / sqrt 2) e_{c mod dim}, so any two class means are `separation`
/// apart when dim >= classes. The means do not depend on the seed, so train and
/// test sets drawn with different seeds share one mixture.
inline LabeledDataset synth_gaussian_mixture(int classes, std::size_t dim, std::size_t n, std::uint64_t seed,
                                             double separation = 3.0) {
    if (classes < 2) throw DomainError("synth_gaussian_mixture: need at least 2 classes");
    if (dim == 0) throw DomainError("synth_gaussian_mixture: dim must be >= 1");
    Rng rng(seed, 0, "data.synthetic");
    LabeledDataset d;
    d.dim = dim;
    d.classes = classes;
    d.provenance = Provenance::Synthetic;
    d.features.resize(n * dim);
    d.labels.resize(n);
    const double offset = separation / std::sqrt(2.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
        d.labels[i] = label;
        double* x = d.features.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) x[j] = rng.normal();
        x[static_cast<std::size_t>(label) % dim] += offset;
    }
    return d;
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open IDX file '" + path + "'", 0);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& path) {
    if (offset + 4 > buf.size()) throw ParseError("truncated IDX header in '" + path + "'", buf.size());
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace detail

struct IdxHeader {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::size_t data_offset = 0;
};

/// Parse the big-endian IDX header (magic 0x00000803 images, 0x00000801 labels).
inline IdxHeader read_idx_header(const std::vector<unsigned char>& buf, const std::string& path) {
    IdxHeader h;
    h.magic = detail::read_be32(buf, 0, path);
    if (h.magic != 0x00000803u && h.magic != 0x00000801u)
        throw ParseError("bad IDX magic in '" + path + "'", 0);
    const std::size_t ndims = h.magic & 0xFFu;
    for (std::size_t i = 0; i < ndims; ++i) h.dims.push_back(detail::read_be32(buf, 4 + 4 * i, path));
    h.data_offset = 4 + 4 * ndims;
    return h;
}

inline IdxHeader read_idx_header(const std::string& path) { return read_idx_header(detail::read_file(path), path); }

/// Load an MNIST-style image/label IDX pair; pixels scaled to [0, 1].
inline LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);
    const auto ih = read_idx_header(img, images_path);
    const auto lh = read_idx_header(lab, labels_path);
    if (ih.magic != 0x00000803u) throw ParseError("'" + images_path + "' is not an IDX image file", 0);
    if (lh.magic != 0x00000801u) throw ParseError("'" + labels_path + "' is not an IDX label file", 0);
    const std::size_t n = ih.dims[0];
    if (lh.dims[0] != n) throw ParseError("image/label count mismatch in '" + labels_path + "'", 4);
    const std::size_t dim = static_cast<std::size_t>(ih.dims[1]) * ih.dims[2];
    if (img.size() < ih.data_offset + n * dim)
        throw ParseError("truncated IDX image payload in '" + images_path + "'", img.size());
    if (lab.size() < lh.data_offset + n)
        throw ParseError("truncated IDX label payload in '" + labels_path + "'", lab.size());

    LabeledDataset d;
    d.dim = dim;
    d.provenance = Provenance::MnistIdx;
    d.features.resize(n * dim);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n * dim; ++i) d.features[i] = img[ih.data_offset + i] / 255.0;
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = lab[lh.data_offset + i];
        if (y > 9) throw ParseError("label out of range in '" + labels_path + "'", lh.data_offset + i);
        d.labels[i] = y;
        max_label = std::max(max_label, y);
    }
    d.classes = std::max(10, max_label + 1);
    return d;
}

/// First n samples of a dataset.
inline LabeledDataset head(const LabeledDataset& d, std::size_t n) {
    n = std::min(n, d.size());
    LabeledDataset out = d;
    out.features.resize(n * d.dim);
    out.labels.resize(n);
    return out;
}

// ---------------------------------------------------------------------------
// Federated training loop

enum class Aggregation { Ideal, Baa, Digital };

inline std::string_view to_string(Aggregation a) {
    switch (a) {
        case Aggregation::Ideal: return "ideal";
        case Aggregation::Baa: return "baa";
        case Aggregation::Digital: return "digital";
    }
    return "?";
}

struct TrainConfig {
    double eta = 0.1;
    int tau = 5;
    std::int64_t n_cr = 50;
    std::size_t batch_size = 32;
    Aggregation aggregation = Aggregation::Ideal;

    void validate() const {
        if (!(eta > 0.0)) throw DomainError("TrainConfig: eta must be > 0");
        if (tau < 1) throw DomainError("TrainConfig: tau must be >= 1");
        if (n_cr < 1) throw DomainError("TrainConfig: n_cr must be >= 1");
        if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
    }
};

struct FederatedSetup {
    PartitionSpec partition;
    TrainConfig train;
    SystemParams system;
    network::SchedulingScheme scheme;
    network::Mobility mobility = network::Mobility::Static;
    std::int64_t k_devices = 20;
    std::uint64_t seed = 1;
    phy::BaaOptions baa;
    phy::DigitalOptions digital;
    bool keep_history = false;  ///< store the global model after every round
};

struct RoundRecord {
    std::int64_t round = 0;
    double accuracy = 0.0;
    double loss = 0.0;        ///< test-set cross-entropy
    double latency_s = 0.0;   ///< communication latency of this round
    double rho0_db = std::numeric_limits<double>::quiet_NaN();  ///< aligned receive SNR (analog only)
    double truncation_frac = 0.0;
    std::int64_t scheduled = 0;
    bool skipped = false;     ///< empty schedule, global model unchanged
};

struct TrainResult {
    std::vector<RoundRecord> trace;
    ModelParams final_model;
    std::vector<ModelParams> history;
};

/// Seed of device k's SGD stream in a given round.
inline Rng sgd_stream(std::uint64_t seed, std::int64_t round, std::int64_t device) {
    return Rng(seed, static_cast<std::uint64_t>(round) * 1000003ULL + static_cast<std::uint64_t>(device), "train.sgd");
}

/// Run N_CR rounds of broadcast, scheduling, local SGD, aggregation and evaluation.
/// Fully determined by (data, setup); rounds with nobody scheduled are skipped.
inline TrainResult federated_train(const LabeledDataset& train, const LabeledDataset& test, const FederatedSetup& s) {
    s.train.validate();
    const SoftmaxModel model = model_for(train);
    Rng part_rng(s.seed, 0, "train.partition");
    const auto shards = partition(train, s.partition, s.k_devices, part_rng);
    Rng topo_rng(s.seed, 0, "train.topology");
    auto net = network::sample_topology(s.k_devices, s.system.r_cell, topo_rng, s.mobility);

    TrainResult out;
    ModelParams global = model.zeros();
    const auto q = static_cast<std::int64_t>(model.param_count());

    for (std::int64_t round = 0; round < s.train.n_cr; ++round) {
        if (round > 0) net = network::advance_round(net, topo_rng);
        const auto decision = network::schedule(net, s.scheme, round);
        RoundRecord rec;
        rec.round = round;
        rec.scheduled = static_cast<std::int64_t>(decision.scheduled_ids.size());

        if (decision.empty) {
            rec.skipped = true;
        } else {
            std::vector<ModelParams> locals;
            locals.reserve(decision.scheduled_ids.size());
            for (auto id : decision.scheduled_ids) {
                Rng rng = sgd_stream(s.seed, round, id);
                locals.push_back(local_sgd(model, global.weights, train, shards[static_cast<std::size_t>(id)],
                                           s.train.eta, s.train.tau, s.train.batch_size, rng));
            }
            const auto radii = network::scheduled_radii(net, decision);
            Rng channel_rng(s.seed, static_cast<std::uint64_t>(round), "train.channel");

            switch (s.train.aggregation) {
                case Aggregation::Ideal:
                    global = global_average(locals);
                    break;
                case Aggregation::Baa: {
                    const auto spec = phy::NormalizationSpec::from_model(global.weights);
                    std::vector<std::vector<double>> raw;
                    raw.reserve(locals.size());
                    for (auto& l : locals) raw.push_back(std::move(l.weights));
                    const auto res = phy::baa_round(phy::normalize_updates(raw, spec), radii, s.system, channel_rng, s.baa);
                    global.weights = phy::denormalize(res.aggregate, spec);
                    rec.latency_s = analytics::latency_baa(q, s.system);
                    rec.rho0_db = linear_to_db(res.diagnostics.snr);
                    rec.truncation_frac = res.diagnostics.mean_truncation();
                    break;
                }
                case Aggregation::Digital: {
                    std::vector<std::vector<double>> raw;
                    raw.reserve(locals.size());
                    for (auto& l : locals) raw.push_back(std::move(l.weights));
                    const auto res = phy::digital_round(raw, radii, s.system, channel_rng, s.digital);
                    global.weights = res.aggregate;
                    rec.latency_s = res.round_latency;
                    break;
                }
            }
        }
        rec.accuracy = accuracy(model, global.weights, test);
        rec.loss = dataset_loss(model, global.weights, test);
        out.trace.push_back(rec);
        if (s.keep_history) out.history.push_back(global);
    }
    out.final_model = std::move(global);
    return out;
}

}  // namespace baa::learning
