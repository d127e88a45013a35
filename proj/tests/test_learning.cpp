#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "baa/learning.hpp"
#include "support.hpp"

using namespace baa;
using namespace baa::learning;

namespace {

std::vector<std::size_t> all_indices(const LabeledDataset& d) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

void put_be32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) buf.push_back(static_cast<unsigned char>((v >> s) & 0xFF));
}

std::string write_bytes(const std::string& name, const std::vector<unsigned char>& bytes) {
    const auto path = std::filesystem::temp_directory_path() / ("baa_test_" + name);
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                static_cast<std::streamsize>(bytes.size()));
    return path.string();
}

}  // namespace

TEST(Softmax, GradientMatchesCentralDifferences) {
    const auto data = synth_gaussian_mixture(4, 6, 60, 3);
    const auto model = model_for(data);
    Rng rng(1);
    std::vector<double> w(model.param_count());
    for (auto& v : w) v = 0.3 * rng.normal();
    const auto idx = all_indices(data);
    const auto lg = loss_and_gradient(model, w, data, idx);
    for (int probe = 0; probe < 20; ++probe) {
        const auto i = static_cast<std::size_t>(rng.below(w.size()));
        const double h = 1e-5;
        auto wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        const double fd = (dataset_loss(model, wp, data) - dataset_loss(model, wm, data)) / (2 * h);
        EXPECT_LT(std::abs(fd - lg.gradient[i]) / std::max(1e-8, std::abs(fd)), 1e-5) << "param " << i;
    }
}

TEST(Softmax, HandComputedTwoClassExample) {
    // One sample x = 2, label 1; zero weights give p = (1/2, 1/2).
    LabeledDataset d;
    d.dim = 1;
    d.classes = 2;
    d.features = {2.0};
    d.labels = {1};
    const std::vector<std::size_t> idx{0};
    const auto lg = loss_and_gradient(model_for(d), std::vector<double>(4, 0.0), d, idx);
    EXPECT_NEAR(lg.loss, std::log(2.0), 1e-15);
    // layout: [w_0, w_1, b_0, b_1]; d/dz_c = p_c - y_c
    EXPECT_NEAR(lg.gradient[0], 0.5 * 2.0, 1e-15);
    EXPECT_NEAR(lg.gradient[1], -0.5 * 2.0, 1e-15);
    EXPECT_NEAR(lg.gradient[2], 0.5, 1e-15);
    EXPECT_NEAR(lg.gradient[3], -0.5, 1e-15);
}

TEST(Softmax, StableForHugeLogits) {
    LabeledDataset d;
    d.dim = 1;
    d.classes = 2;
    d.features = {1.0};
    d.labels = {0};
    const std::vector<std::size_t> idx{0};
    const auto lg = loss_and_gradient(model_for(d), std::vector<double>{1000.0, -1000.0, 0.0, 0.0}, d, idx);
    EXPECT_TRUE(std::isfinite(lg.loss));
    EXPECT_NEAR(lg.loss, 0.0, 1e-12);
}

TEST(Softmax, GlobalLossIsMeanOfLocalLosses) {
    const auto data = synth_gaussian_mixture(3, 4, 90, 2);
    const auto model = model_for(data);
    Rng rng(2);
    PartitionSpec spec;
    const auto shards = partition(data, spec, 3, rng);
    const auto w = model.zeros().weights;
    EXPECT_NEAR(global_loss(model, w, data, shards), dataset_loss(model, w, data), 1e-12);
}

TEST(Sgd, FullBatchIsDeterministicGradientDescent) {
    const auto data = synth_gaussian_mixture(3, 5, 40, 4);
    const auto model = model_for(data);
    const auto idx = all_indices(data);
    Rng a(1), b(2);
    const auto w0 = model.zeros().weights;
    const auto wa = local_sgd(model, w0, data, idx, 0.5, 3, 1000, a);
    const auto wb = local_sgd(model, w0, data, idx, 0.5, 3, 1000, b);
    EXPECT_EQ(wa.weights, wb.weights);
    auto manual = w0;
    for (int s = 0; s < 3; ++s) {
        const auto g = loss_and_gradient(model, manual, data, idx).gradient;
        for (std::size_t i = 0; i < manual.size(); ++i) manual[i] -= 0.5 * g[i];
    }
    for (std::size_t i = 0; i < manual.size(); ++i) EXPECT_NEAR(wa.weights[i], manual[i], 1e-15);
    EXPECT_LT(dataset_loss(model, wa.weights, data), dataset_loss(model, w0, data));
}

TEST(Sgd, RejectsBadArguments) {
    const auto data = synth_gaussian_mixture(3, 5, 40, 4);
    const auto model = model_for(data);
    Rng rng(1);
    const auto w0 = model.zeros().weights;
    const std::vector<std::size_t> none;
    EXPECT_THROW(local_sgd(model, w0, data, none, 0.1, 1, 4, rng), DomainError);
    EXPECT_THROW(local_sgd(model, w0, data, all_indices(data), 0.1, 0, 4, rng), DomainError);
    EXPECT_THROW(global_average({}), DomainError);
}

TEST(Sgd, AverageIsCoordinateMean) {
    const auto avg = global_average({{{1.0, 2.0}}, {{3.0, -2.0}}, {{2.0, 3.0}}});
    EXPECT_EQ(avg.weights, (std::vector<double>{2.0, 1.0}));
}

TEST(Partition, IidSharesAreEqualAndDisjoint) {
    const auto data = synth_gaussian_mixture(10, 4, 1000, 5);
    Rng rng(3);
    const auto shards = partition(data, {PartitionMode::Iid, 0, 0, 0}, 20, rng);
    std::set<std::size_t> seen;
    for (const auto& s : shards) {
        EXPECT_EQ(s.size(), 50u);
        for (auto i : s) EXPECT_TRUE(seen.insert(i).second);
    }
}

TEST(Partition, NoniidShardsConcentrateLabels) {
    const auto data = synth_gaussian_mixture(10, 4, 2000, 6);
    Rng rng(4);
    const PartitionSpec spec{PartitionMode::NoniidShards, 40, 50, 2};
    const auto shards = partition(data, spec, 20, rng);
    std::set<std::size_t> seen;
    double mean_labels = 0.0;
    for (const auto& s : shards) {
        EXPECT_EQ(s.size(), 100u);
        std::set<int> labels;
        for (auto i : s) {
            EXPECT_TRUE(seen.insert(i).second);
            labels.insert(data.labels[i]);
        }
        EXPECT_LE(labels.size(), 4u);  // each label-sorted shard straddles at most one boundary
        mean_labels += static_cast<double>(labels.size()) / 20.0;
    }
    EXPECT_LT(mean_labels, 3.0);
    EXPECT_THROW(partition(data, {PartitionMode::NoniidShards, 10, 50, 2}, 20, rng), DomainError);
    EXPECT_THROW(partition(data, {PartitionMode::NoniidShards, 100, 50, 2}, 20, rng), DomainError);
}

TEST(Data, SyntheticMixtureIsSeededAndSeparated) {
    const auto a = synth_gaussian_mixture(10, 20, 500, 7);
    const auto b = synth_gaussian_mixture(10, 20, 500, 7);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.provenance, Provenance::Synthetic);
    // Class-conditional mean of the signal coordinate sits at separation / sqrt 2.
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.labels[i] == 3) {
            s += a.row(i)[3];
            ++n;
        }
    EXPECT_NEAR(s / n, 3.0 / std::sqrt(2.0), 0.35);
}

TEST(Data, IdxRoundTrip) {
    std::vector<unsigned char> img, lab;
    put_be32(img, 0x00000803);
    put_be32(img, 3);
    put_be32(img, 2);
    put_be32(img, 2);
    for (int i = 0; i < 12; ++i) img.push_back(static_cast<unsigned char>(i * 20));
    put_be32(lab, 0x00000801);
    put_be32(lab, 3);
    for (unsigned char y : {7, 0, 9}) lab.push_back(y);
    const auto ip = write_bytes("img.idx", img);
    const auto lp = write_bytes("lab.idx", lab);
    const auto d = load_mnist_idx(ip, lp);
    EXPECT_EQ(d.size(), 3u);
    EXPECT_EQ(d.dim, 4u);
    EXPECT_EQ(d.classes, 10);
    EXPECT_EQ(d.labels, (std::vector<int>{7, 0, 9}));
    EXPECT_NEAR(d.features[5], 100.0 / 255.0, 1e-15);
    EXPECT_EQ(d.provenance, Provenance::MnistIdx);
    EXPECT_EQ(head(d, 2).size(), 2u);
    EXPECT_EQ(read_idx_header(ip).dims, (std::vector<std::uint32_t>{3, 2, 2}));
}

TEST(Data, IdxErrorsCarryOffsets) {
    std::vector<unsigned char> img;
    put_be32(img, 0x00000803);
    put_be32(img, 2);
    put_be32(img, 2);
    put_be32(img, 2);
    img.push_back(1);  // 1 of 8 payload bytes
    std::vector<unsigned char> lab;
    put_be32(lab, 0x00000801);
    put_be32(lab, 2);
    lab.push_back(1);
    lab.push_back(2);
    const auto ip = write_bytes("trunc_img.idx", img);
    const auto lp = write_bytes("ok_lab.idx", lab);
    try {
        load_mnist_idx(ip, lp);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), img.size());
    }

    std::vector<unsigned char> bad{0x00, 0x00, 0x09, 0x99};
    try {
        read_idx_header(bad, "bad");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    std::vector<unsigned char> short_header{0x00, 0x00};
    EXPECT_THROW(read_idx_header(short_header, "short"), ParseError);

    std::vector<unsigned char> lab_bad;
    put_be32(lab_bad, 0x00000801);
    put_be32(lab_bad, 2);
    lab_bad.push_back(1);
    lab_bad.push_back(42);
    std::vector<unsigned char> img_ok;
    put_be32(img_ok, 0x00000803);
    put_be32(img_ok, 2);
    put_be32(img_ok, 1);
    put_be32(img_ok, 1);
    img_ok.push_back(0);
    img_ok.push_back(255);
    try {
        load_mnist_idx(write_bytes("img_ok.idx", img_ok), write_bytes("lab_bad.idx", lab_bad));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 9u);
    }
    EXPECT_THROW(load_mnist_idx("/nonexistent/images", lp), ParseError);
}

class Federated : public ::testing::Test {
protected:
    LabeledDataset train = synth_gaussian_mixture(10, 20, 1000, 11);
    LabeledDataset test = synth_gaussian_mixture(10, 20, 1000, 12);
    testing_support::QuietWarnings quiet;

    FederatedSetup setup(Aggregation a) const {
        FederatedSetup s;
        s.partition = {PartitionMode::Iid, 0, 0, 0};
        s.train.aggregation = a;
        s.train.n_cr = 15;
        s.k_devices = 10;
        s.seed = 3;
        return s;
    }
};

TEST_F(Federated, IdealTrainingLearns) {
    const auto r = federated_train(train, test, setup(Aggregation::Ideal));
    ASSERT_EQ(r.trace.size(), 15u);
    EXPECT_GT(r.trace.back().accuracy, 0.5);
    EXPECT_LT(r.trace.back().loss, r.trace.front().loss);
    for (const auto& rec : r.trace) {
        EXPECT_EQ(rec.latency_s, 0.0);
        EXPECT_TRUE(std::isnan(rec.rho0_db));
    }
}

TEST_F(Federated, Deterministic) {
    auto s = setup(Aggregation::Baa);
    const auto a = federated_train(train, test, s);
    const auto b = federated_train(train, test, s);
    EXPECT_EQ(a.final_model.weights, b.final_model.weights);
}

TEST_F(Federated, HighSnrAnalogTracksIdeal) {
    auto s = setup(Aggregation::Baa);
    s.system.p0 = 10.0;
    s.system.g_th = 1e-4;
    const auto analog = federated_train(train, test, s);
    const auto ideal = federated_train(train, test, setup(Aggregation::Ideal));
    EXPECT_NEAR(analog.trace.back().accuracy, ideal.trace.back().accuracy, 0.03);
    for (const auto& rec : analog.trace) {
        EXPECT_NEAR(rec.latency_s, analytics::latency_baa(210, s.system), 1e-15);
        EXPECT_LT(rec.truncation_frac, 0.01);
        EXPECT_TRUE(std::isfinite(rec.rho0_db));
    }
}

TEST_F(Federated, DigitalMatchesIdealAndPaysStragglerLatency) {
    const auto dig = federated_train(train, test, setup(Aggregation::Digital));
    const auto ideal = federated_train(train, test, setup(Aggregation::Ideal));
    EXPECT_NEAR(dig.trace.back().accuracy, ideal.trace.back().accuracy, 0.01);
    for (const auto& rec : dig.trace) EXPECT_GT(rec.latency_s, 0.0);
}

TEST_F(Federated, EmptyRoundsAreSkipped) {
    auto s = setup(Aggregation::Ideal);
    s.scheme = network::SchedulingScheme::cell_interior(0.5);
    s.keep_history = true;
    const auto r = federated_train(train, test, s);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        if (r.trace[i].skipped) {
            EXPECT_EQ(r.trace[i].scheduled, 0);
            const auto& before = i ? r.history[i - 1].weights : SoftmaxModel{20, 10}.zeros().weights;
            EXPECT_EQ(r.history[i].weights, before);
        }
    }
    EXPECT_TRUE(std::any_of(r.trace.begin(), r.trace.end(), [](const RoundRecord& x) { return x.skipped; }));
}
