#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "greenflow/metrics.hpp"
#include "greenflow/random.hpp"

using namespace greenflow;

namespace {

ConfusionMatrix cm_of(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
    return ConfusionMatrix{tp, tn, fp, fn};
}

// Pearson correlation of the two 0/1 vectors, computed from scratch.
double pearson(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return va == 0 || vb == 0 ? 0.0 : cov / std::sqrt(va * vb);
}

} // namespace

TEST(Metrics, WorkedExample) {
    const auto cm = cm_of(90, 80, 20, 10);
    EXPECT_NEAR(mcc(cm), 0.70353, 5e-6);
    EXPECT_DOUBLE_EQ(balanced_accuracy(cm), 0.85);
    EXPECT_NEAR(f1(cm), 0.85714, 5e-6);
}

TEST(Metrics, PerfectAndInverted) {
    EXPECT_DOUBLE_EQ(mcc(cm_of(10, 10, 0, 0)), 1.0);
    EXPECT_DOUBLE_EQ(mcc(cm_of(0, 0, 10, 10)), -1.0);
    EXPECT_DOUBLE_EQ(balanced_accuracy(cm_of(0, 0, 10, 10)), 0.0);
}

TEST(Metrics, DegenerateMarginalsGiveZero) {
    EXPECT_EQ(mcc(cm_of(0, 50, 0, 0)), 0.0);  // all benign, all predicted benign
    EXPECT_EQ(mcc(cm_of(30, 0, 20, 0)), 0.0); // everything predicted malicious
    EXPECT_EQ(mcc(cm_of(0, 20, 0, 30)), 0.0); // everything predicted benign
    EXPECT_EQ(mcc(cm_of(0, 0, 0, 0)), 0.0);
    EXPECT_EQ(f1(cm_of(0, 10, 0, 0)), 0.0);
}

TEST(Metrics, ClassSwapSymmetry) {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const auto cm = cm_of(rng.index(1000), rng.index(1000), rng.index(1000), rng.index(1000));
        EXPECT_NEAR(mcc(cm), mcc(cm_of(cm.tn, cm.tp, cm.fn, cm.fp)), 1e-12);
        EXPECT_NEAR(mcc(cm), -mcc(cm_of(cm.fn, cm.fp, cm.tn, cm.tp)), 1e-12);
    }
}

TEST(Metrics, ScaleInvariant) {
    const auto cm = cm_of(90, 80, 20, 10);
    for (std::uint64_t k : {2ull, 1000ull, 1'000'000'000ull}) {
        EXPECT_NEAR(mcc(cm_of(cm.tp * k, cm.tn * k, cm.fp * k, cm.fn * k)), mcc(cm), 1e-12);
    }
}

TEST(Metrics, MatchesPearsonOnRandomVectors) {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.index(300);
        const double p = rng.unit();
        std::vector<std::uint8_t> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = rng.bernoulli(p);
            pred[i] = rng.bernoulli(0.7) ? truth[i] : static_cast<std::uint8_t>(rng.index(2));
        }
        const auto cm = confusion(pred, truth);
        EXPECT_EQ(cm.total(), n);
        std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            tp += pred[i] && truth[i];
            tn += !pred[i] && !truth[i];
            fp += pred[i] && !truth[i];
            fn += !pred[i] && truth[i];
        }
        EXPECT_EQ(cm, cm_of(tp, tn, fp, fn));
        const double m = mcc(cm);
        EXPECT_NEAR(m, pearson(pred, truth), 1e-9);
        EXPECT_GE(m, -1.0);
        EXPECT_LE(m, 1.0);
    }
}

TEST(Metrics, LengthMismatch) {
    const std::vector<std::uint8_t> a{1, 0, 1}, b{1, 0};
    try {
        confusion(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
}
