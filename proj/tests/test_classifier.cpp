// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "matseg/classifier.hpp"
#include "matseg/error.hpp"
#include "matseg/rng.hpp"
#include "test_support.hpp"

namespace {

using namespace matseg;
using matseg::testutil::TempDir;

NetworkConfig small_conv(std::size_t len, std::size_t classes) {
    NetworkConfig c;
    c.input_len = len;
    c.classes = classes;
    c.conv_blocks = 2;
    c.channels = 3;
    c.kernel_size = 3;
    c.pool = 2;
    c.hidden_widths = {6};
    return c;
}

NetworkConfig linear(std::size_t len, std::size_t classes) {
    NetworkConfig c;
    c.input_len = len;
    c.classes = classes;
    c.conv_blocks = 0;
    c.hidden_widths = {};
    return c;
}

Dataset gaussian_blobs(std::size_t per_class, std::size_t classes, std::size_t len, double spread, std::uint64_t seed) {
    Dataset d;
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < per_class * classes; ++i) {
        const int label = static_cast<int>(i % classes);
        std::vector<float> f(len);
        for (std::size_t t = 0; t < len; ++t) {
            f[t] = static_cast<float>((t % classes == static_cast<std::size_t>(label) ? 1.0 : 0.0) + spread * rng.normal());
        }
        d.add(f, label);
    }
    return d;
}

std::vector<std::size_t> all_of(const Dataset& d) {
    std::vector<std::size_t> b(d.size());
    std::iota(b.begin(), b.end(), std::size_t{0});
    return b;
}

double accuracy(const Network& net, const Dataset& d) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto p = net.forward(d.feature(i));
        ok += static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin()) == d.labels[i];
    }
    return static_cast<double>(ok) / static_cast<double>(d.size());
}

TEST(Forward, ZeroFinalLayerIsUniform) {
    Network net = Network::build(small_conv(8, 4), 1);
    const std::size_t last = net.layers().size() - 1;
    for (auto& p : net.layer_params(last)) p = 0.0;
    const auto pred = net.forward(std::vector<float>(8, 0.3f));
    for (const double p : pred.probs) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(Forward, ProbabilitiesSumToOne) {
    const Network net = Network::build(NetworkConfig::desk_default(32, 5), 2);
    SplitMix64 rng(3);
    for (int i = 0; i < 20; ++i) {
        std::vector<float> f(32);
        for (auto& v : f) v = static_cast<float>(3 * rng.normal());
        const auto p = net.forward(f);
        EXPECT_NEAR(std::accumulate(p.probs.begin(), p.probs.end(), 0.0), 1.0, 1e-12);
    }
    EXPECT_THROW(net.forward(std::vector<float>(31)), ValidationError);
}

TEST(Forward, SingleLinearLayerByHand) {
    Network net = Network::build(linear(3, 2), 4);
    const std::vector<double> p{1, 0, -1, 0.5, 2, 0, 0.25, -0.25};
    std::copy(p.begin(), p.end(), net.params().begin());
    const auto pred = net.forward(std::vector<double>{2, 3, 4});
    EXPECT_EQ(pred.logits, (std::vector<double>{1 * 2 + 0 * 3 - 1 * 4 + 0.25, 0.5 * 2 + 2 * 3 + 0 * 4 - 0.25}));
}

TEST(Presets, Architectures) {
    const auto r18 = Network::build(NetworkConfig::resnet18(32, 10), 1);
    std::size_t blocks = 0;
    for (const auto& l : r18.layers()) blocks += l->kind() == "residual";
    EXPECT_EQ(blocks, 8u);
    const auto mlp = Network::build(linear(5, 3), 1);
    for (const auto& l : mlp.layers()) EXPECT_NE(l->kind(), "conv1d");
    EXPECT_THROW(Network::build(linear(5, 1), 1), ValidationError);
    EXPECT_EQ(TrainConfig::full_scale_preset().learning_rate, 1e-6);
    EXPECT_EQ(TrainConfig{}.learning_rate, 1e-3);
}

TEST(Loss, UniformPredictionGivesLogC) {
    Network net = Network::build(linear(4, 7), 1);
    for (auto& p : net.params()) p = 0.0;
    const Dataset d = gaussian_blobs(3, 7, 4, 0.1, 2);
    const auto lg = loss_and_gradients(net, d, all_of(d), std::vector<double>(7, 1.0));
    EXPECT_NEAR(lg.loss, std::log(7.0), 1e-12);
}

TEST(Loss, ConfidentCorrectPredictionIsNearZero) {
    Network net = Network::build(linear(2, 2), 1);
    // Logit gap of 28 puts the correct class at 1 - 7e-13.
    const std::vector<double> p{14, 0, -14, 0, 0, 0};
    std::copy(p.begin(), p.end(), net.params().begin());
    Dataset d;
    d.add(std::vector<float>{1.0f, 0.0f}, 0);
    const auto lg = loss_and_gradients(net, d, all_of(d), std::vector<double>{1.0, 1.0});
    EXPECT_LT(lg.loss, 1e-12);
    EXPECT_GE(lg.loss, 0.0);
}

TEST(Loss, GradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        Network net = Network::build(small_conv(6, 3), seed);
        // Zero biases put all-zero windows exactly on a relu kink; move off it.
        SplitMix64 jitter(seed + 100);
        for (auto& p : net.params()) p += 0.1 * jitter.normal();
        const Dataset d = gaussian_blobs(3, 3, 6, 0.5, seed);
        const std::vector<double> w{0.5, 1.0, 2.0};
        const auto batch = all_of(d);
        const auto lg = loss_and_gradients(net, d, batch, w);
        const double h = 1e-6;
        for (std::size_t i = 0; i < net.param_count(); ++i) {
            const double keep = net.params()[i];
            net.params()[i] = keep + h;
            const double up = loss_and_gradients(net, d, batch, w).loss;
            net.params()[i] = keep - h;
            const double dn = loss_and_gradients(net, d, batch, w).loss;
            net.params()[i] = keep;
            const double numeric = (up - dn) / (2 * h);
            const double rel = std::abs(numeric - lg.gradient[i]) / std::max({std::abs(numeric), std::abs(lg.gradient[i]), 1e-6});
            ASSERT_LT(rel, 1e-3) << "parameter " << i << " seed " << seed;
        }
    }
}

TEST(Loss, ShardedMatchesReferenceForAnyThreadCount) {
    const Network net = Network::build(small_conv(8, 3), 5);
    const Dataset d = gaussian_blobs(20, 3, 8, 0.3, 6);
    const auto batch = all_of(d);
    const std::vector<double> w{1.0, 1.5, 0.7};
    const auto ref = reference::loss_and_gradients(net, d, batch, w);
    const auto one = loss_and_gradients(net, d, batch, w, 1);
    const auto three = loss_and_gradients(net, d, batch, w, 3);
    EXPECT_EQ(one.loss, three.loss);
    EXPECT_EQ(one.gradient, three.gradient);
    EXPECT_NEAR(one.loss, ref.loss, 1e-12);
    for (std::size_t i = 0; i < ref.gradient.size(); ++i) EXPECT_NEAR(one.gradient[i], ref.gradient[i], 1e-12);
}

TEST(Loss, RejectsEmptyBatchAndBadLabels) {
    const Network net = Network::build(linear(2, 2), 1);
    Dataset d;
    d.add(std::vector<float>{1.0f, 2.0f}, 5);
    EXPECT_THROW(loss_and_gradients(net, d, {}, std::vector<double>{1, 1}), ValidationError);
    EXPECT_THROW(loss_and_gradients(net, d, all_of(d), std::vector<double>{1, 1}), ValidationError);
}

TEST(Weights, InverseFrequency) {
    Dataset d;
    for (int i = 0; i < 3; ++i) d.add(std::vector<float>{0.0f}, 0);
    d.add(std::vector<float>{0.0f}, 1);
    const auto w = inverse_frequency_weights(d, 2);
    EXPECT_NEAR(w[0], 4.0 / 6.0, 1e-15);
    EXPECT_NEAR(w[1], 2.0, 1e-15);
    // An absent class gets no weight and still counts in C.
    const auto w3 = inverse_frequency_weights(d, 3);
    EXPECT_NEAR(w3[0], 4.0 / 9.0, 1e-15);
    EXPECT_NEAR(w3[1], 4.0 / 3.0, 1e-15);
    EXPECT_EQ(w3[2], 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    AdamState adam;
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.3, -5.0};
    adam.update(p, g, 0.01);
    EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-9);
    EXPECT_NEAR(p[1], -2.0 + 0.01, 1e-9);
    EXPECT_EQ(adam.step, 1u);
}

TEST(Train, MemorizesOneSample) {
    Dataset d;
    d.add(std::vector<float>{0.2f, -0.4f, 0.9f, 0.1f}, 2);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.learning_rate = 1e-2;
    cfg.seed = 1;
    cfg.standardize = false;
    const auto r = train(Network::build(small_conv(4, 3), 2), d, cfg);
    EXPECT_LT(r.loss_history.back(), 1e-2);
    EXPECT_EQ(r.steps, 300u);
}

TEST(Train, SeparatesLinearlySeparableClasses) {
    const Dataset d = gaussian_blobs(200, 2, 6, 0.15, 3);
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.batch_size = 32;
    const auto r = train(Network::build(NetworkConfig::desk_default(6, 2), 5), d, cfg);
    EXPECT_GE(accuracy(r.model, d), 0.99);
    EXPECT_EQ(r.steps, 20u * 13u);
    EXPECT_EQ(r.loss_history.size(), 20u);
}

TEST(Train, SameSeedIsBitIdenticalAcrossThreadCounts) {
    const Dataset d = gaussian_blobs(40, 3, 8, 0.4, 9);
    TrainConfig cfg;
    cfg.seed = 10;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    const auto a = train(Network::build(small_conv(8, 3), 11), d, cfg, 1);
    const auto b = train(Network::build(small_conv(8, 3), 11), d, cfg, 3);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_TRUE(std::equal(a.model.params().begin(), a.model.params().end(), b.model.params().begin()));
    cfg.seed = 12;
    const auto c = train(Network::build(small_conv(8, 3), 11), d, cfg, 1);
    EXPECT_NE(a.loss_history, c.loss_history);
}

TEST(Train, PlateauReducesLearningRate) {
    const Dataset d = gaussian_blobs(10, 2, 4, 0.3, 1);
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.epochs = 13;
    cfg.learning_rate = 1e-12;  // loss cannot move, every epoch is stale
    const auto r = train(Network::build(linear(4, 2), 1), d, cfg);
    for (std::size_t e = 0; e <= 5; ++e) EXPECT_EQ(r.learning_rates[e], 1e-12);
    for (std::size_t e = 6; e <= 10; ++e) EXPECT_EQ(r.learning_rates[e], 1e-12 * 0.1);
    EXPECT_EQ(r.learning_rates[11], 1e-12 * 0.1 * 0.1);
}

TEST(Train, DivergenceAborts) {
    const Dataset d = gaussian_blobs(10, 2, 4, 0.3, 1);
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.learning_rate = 1e300;
    EXPECT_THROW(train(Network::build(small_conv(4, 2), 1), d, cfg), TrainingError);
}

TEST(Train, RequiresSeedAndData) {
    TrainConfig cfg;
    EXPECT_THROW(train(Network::build(linear(2, 2), 1), gaussian_blobs(2, 2, 2, 0.1, 1), cfg), ValidationError);
    cfg.seed = 1;
    EXPECT_THROW(train(Network::build(linear(2, 2), 1), Dataset{}, cfg), ValidationError);
}

TEST(Train, UpweightingAClassDoesNotLowerItsRecall) {
    // Overlapping, 9:1 imbalanced one-dimensional classes.
    Dataset d;
    SplitMix64 rng(21);
    for (int i = 0; i < 400; ++i) {
        const int label = i % 10 == 0 ? 1 : 0;
        d.add(std::vector<float>{static_cast<float>(label + 0.8 * rng.normal())}, label);
    }
    auto recall = [&](const Network& net) {
        int hit = 0, total = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.labels[i] != 1) continue;
            ++total;
            const auto p = net.forward(d.feature(i));
            hit += p.probs[1] > p.probs[0];
        }
        return static_cast<double>(hit) / total;
    };
    double plain = 0.0, boosted = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig cfg;
        cfg.seed = seed;
        cfg.epochs = 15;
        cfg.batch_size = 32;
        cfg.learning_rate = 1e-2;
        cfg.class_weights = {1.0, 1.0};
        plain += recall(train(Network::build(linear(1, 2), seed), d, cfg).model);
        cfg.class_weights = {1.0, 9.0};
        boosted += recall(train(Network::build(linear(1, 2), seed), d, cfg).model);
    }
    EXPECT_GE(boosted, plain);
    EXPECT_GT(boosted, 0.0);
}

TEST(PredictTile, ParallelMatchesReferenceAndNormalizes) {
    const Network net = Network::build(small_conv(8, 4), 3);
    FeatureGrid grid{7, 5, 8, EncodingMode::rr, {}};
    SplitMix64 rng(4);
    for (int i = 0; i < 7 * 5 * 8; ++i) grid.values.push_back(static_cast<float>(rng.normal()));
    const auto ref = reference::predict_tile(net, grid);
    EXPECT_EQ(predict_tile(net, grid, 1), ref);
    EXPECT_EQ(predict_tile(net, grid, 4), ref);
    for (std::size_t p = 0; p < ref.pixel_count(); ++p) {
        const auto probs = ref.at(p);
        EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-6);
    }
    FeatureGrid wrong{1, 1, 3, EncodingMode::rr, {0, 0, 0}};
    EXPECT_THROW(predict_tile(net, wrong), ValidationError);
}

TEST(ModelFile, RoundTripPreservesPredictions) {
    TempDir dir;
    const Dataset d = gaussian_blobs(20, 3, 8, 0.3, 2);
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.epochs = 2;
    auto r = train(Network::build(small_conv(8, 3), 4), d, cfg);
    r.model.class_names = {"a", "b", "c"};
    save_model(r.model, dir / "m.json");
    const Network back = load_model(dir / "m.json");
    EXPECT_EQ(back.config(), r.model.config());
    EXPECT_EQ(back.class_names, r.model.class_names);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto a = r.model.forward(d.feature(i)).probs;
        const auto b = back.forward(d.feature(i)).probs;
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a[c], b[c], 1e-5);
    }
    // Float32 storage is a fixed point after one trip.
    save_model(back, dir / "m2.json");
    const Network again = load_model(dir / "m2.json");
    EXPECT_TRUE(std::equal(again.params().begin(), again.params().end(), back.params().begin()));
    EXPECT_THROW(load_model(dir / "missing.json"), IoError);
}

TEST(NearestCentroid, SeparatedClustersAndTies) {
    Dataset d;
    d.add(std::vector<float>{0, 0}, 0);
    d.add(std::vector<float>{0.2f, 0}, 0);
    d.add(std::vector<float>{10, 10}, 1);
    d.add(std::vector<float>{10, 10.2f}, 1);
    const auto nc = NearestCentroid::fit(d, 2);
    EXPECT_EQ(nc.predict_class(std::vector<float>{0.1f, 0.3f}), 0u);
    EXPECT_EQ(nc.predict_class(std::vector<float>{9, 9}), 1u);

    Dataset tie;
    tie.add(std::vector<float>{-1}, 0);
    tie.add(std::vector<float>{1}, 1);
    EXPECT_EQ(NearestCentroid::fit(tie, 2).predict_class(std::vector<float>{0}), 0u);
    const auto onehot = NearestCentroid::fit(tie, 2).predict(std::vector<float>{0.9f});
    EXPECT_EQ(onehot, (std::vector<double>{0.0, 1.0}));
    EXPECT_THROW(NearestCentroid::fit(tie, 3), ValidationError);
}

TEST(NearestCentroid, AgreesWithExhaustiveSearch) {
    const Dataset train_set = gaussian_blobs(10, 4, 3, 0.6, 5);
    const auto nc = NearestCentroid::fit(train_set, 4);
    SplitMix64 rng(6);
    for (int i = 0; i < 100; ++i) {
        std::vector<float> x(3);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < 4; ++c) {
            double dist = 0.0;
            for (std::size_t t = 0; t < 3; ++t) dist += std::pow(x[t] - nc.centroids()[c][t], 2);
            if (dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        EXPECT_EQ(nc.predict_class(x), best);
    }
}

}  // namespace
