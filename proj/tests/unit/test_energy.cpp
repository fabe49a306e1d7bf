#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "greenflow/energy.hpp"

using namespace greenflow;
namespace fs = std::filesystem;

namespace {

// A fake powercap tree: one package zone, one subzone, one zone without a range file.
class CounterDir : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / ("greenflow_rapl_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(root_);
        fs::create_directories(root_ / "intel-rapl:0");
        fs::create_directories(root_ / "intel-rapl:0:0");
        fs::create_directories(root_ / "intel-rapl:1");
        put("intel-rapl:0/max_energy_range_uj", 1000);
        put("intel-rapl:0:0/energy_uj", 5);
        put("intel-rapl:0:0/max_energy_range_uj", 1000);
        put("intel-rapl:1/energy_uj", 7);
        set(0);
    }
    void TearDown() override { fs::remove_all(root_); }

    void put(const std::string& rel, std::uint64_t v) { std::ofstream(root_ / rel) << v << '\n'; }
    void set(std::uint64_t v) {
        value_ = v;
        put("intel-rapl:0/energy_uj", v);
    }
    // Advances the package counter by `uj`, wrapping at 1000.
    void burn(std::uint64_t uj) { set((value_ + uj) % 1000); }

    fs::path root_;
    std::uint64_t value_ = 0;
};

} // namespace

TEST(Proxy, WorkedExample) {
    const CostModelParams p{5.0, 0.0};
    const auto rep = measure_proxy([] { return WorkloadResult{10, 40}; }, p);
    EXPECT_DOUBLE_EQ(rep.total_uj, 200.0);
    EXPECT_NEAR(rep.uwh_per_sample, 0.00556, 5e-6);
    EXPECT_EQ(rep.meter, MeterKind::Proxy);
    EXPECT_FALSE(rep.low_confidence);
}

TEST(Proxy, MonotoneInVisitsAndDeterministic) {
    const CostModelParams p;
    const auto a = measure_proxy([] { return WorkloadResult{100, 1000}; }, p);
    const auto b = measure_proxy([] { return WorkloadResult{100, 2000}; }, p);
    EXPECT_GT(b.uwh_per_sample, a.uwh_per_sample);
    EXPECT_EQ(a.total_uj, measure_proxy([] { return WorkloadResult{100, 1000}; }, p).total_uj);
    EXPECT_DOUBLE_EQ(b.total_uj - a.total_uj, 1000 * p.uj_per_node_visit);
}

TEST(Proxy, RejectsNonPositiveCost) {
    EXPECT_THROW(Meter::proxy(CostModelParams{0.0, 0.5}), Error);
    EXPECT_THROW(Meter::proxy(CostModelParams{1.0, -0.5}), Error);
}

TEST(Energy, UnitConversion) {
    EXPECT_DOUBLE_EQ(uwh_per_sample(3600.0, 1), 1.0);
    EXPECT_DOUBLE_EQ(uwh_per_sample(7200.0, 4), 0.5);
    EXPECT_EQ(uwh_per_sample(100.0, 0), 0.0);
}

TEST(Energy, WrapDelta) {
    EXPECT_EQ(wrap_delta(100, 250, 1000), 150u);
    EXPECT_EQ(wrap_delta(990, 10, 1000), 20u);
    EXPECT_EQ(wrap_delta(5, 5, 1000), 0u);
    EXPECT_THROW(wrap_delta(10, 5, 0), Error);
}

TEST_F(CounterDir, DiscoverKeepsTopLevelZonesWithRange) {
    const auto c = HardwareCounters::discover(root_);
    ASSERT_EQ(c.zones().size(), 1u);
    EXPECT_EQ(c.zones()[0].dir.filename(), "intel-rapl:0");
    EXPECT_EQ(c.zones()[0].max_range, 1000u);
}

TEST_F(CounterDir, RootFromEnvironment) {
    ::setenv(HardwareCounters::kRootEnv, root_.c_str(), 1);
    EXPECT_EQ(HardwareCounters::default_root(), root_);
    EXPECT_EQ(HardwareCounters::discover().zones().size(), 1u);
    ::unsetenv(HardwareCounters::kRootEnv);
}

TEST_F(CounterDir, MissingCountersAreUnavailable) {
    try {
        HardwareCounters::discover(root_ / "nope");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CounterUnavailable);
    }
}

TEST_F(CounterDir, MeasuresAcrossWraparound) {
    set(900);
    const auto c = HardwareCounters::discover(root_);
    HardwareOptions opts;
    opts.min_delta_uj = 1000;
    int calls = 0;
    const auto rep = measure_hardware(c, [&] {
        ++calls;
        burn(300);
        return WorkloadResult{10, 0};
    }, opts);
    EXPECT_EQ(calls, 4); // 300, 600, 900, 1200 > 1000
    EXPECT_EQ(rep.repetitions, 4u);
    EXPECT_DOUBLE_EQ(rep.total_uj, 1200.0);
    EXPECT_EQ(rep.samples, 40u);
    EXPECT_DOUBLE_EQ(rep.uwh_per_sample, 1200.0 / 3600.0 / 40.0);
    EXPECT_EQ(rep.meter, MeterKind::Hardware);
    EXPECT_FALSE(rep.low_confidence);
}

TEST_F(CounterDir, UnitLaw) {
    const auto c = HardwareCounters::discover(root_);
    HardwareOptions opts;
    opts.min_delta_uj = 100;
    const auto rep = measure_hardware(c, [&] {
        burn(360);
        return WorkloadResult{1, 0};
    }, opts);
    EXPECT_EQ(rep.repetitions, 1u);
    EXPECT_DOUBLE_EQ(rep.uwh_per_sample, 0.1);
}

TEST_F(CounterDir, ZeroDeltaIsLowConfidence) {
    const auto c = HardwareCounters::discover(root_);
    HardwareOptions opts;
    opts.max_repetitions = 3;
    const auto rep = measure_hardware(c, [] { return WorkloadResult{5, 0}; }, opts);
    EXPECT_EQ(rep.repetitions, 3u);
    EXPECT_EQ(rep.total_uj, 0.0);
    EXPECT_TRUE(rep.low_confidence);
}

TEST_F(CounterDir, CounterVanishingMidRunIsUnavailable) {
    const auto c = HardwareCounters::discover(root_);
    try {
        measure_hardware(c, [&] {
            fs::remove(root_ / "intel-rapl:0/energy_uj");
            return WorkloadResult{1, 0};
        });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CounterUnavailable);
    }
    EXPECT_FALSE(MeasurementGuard::active());
}

TEST_F(CounterDir, OneMeasurementAtATime) {
    const auto meter = Meter::hardware(HardwareCounters::discover(root_));
    EXPECT_EQ(meter.kind(), MeterKind::Hardware);
    try {
        meter.measure([&] {
            meter.measure([&] {
                burn(2000);
                return WorkloadResult{1, 0};
            });
            return WorkloadResult{1, 0};
        });
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MeasurementBusy);
    }
    EXPECT_FALSE(MeasurementGuard::active());
}

TEST(Calibrate, RecoversExactCoefficients) {
    std::vector<CalibrationPoint> pts;
    for (std::uint64_t s : {10u, 100u, 1000u}) {
        for (std::uint64_t v : {5u, 40u, 300u}) {
            pts.push_back({v * s, s, 0.02 * static_cast<double>(v * s) + 0.3 * static_cast<double>(s)});
        }
    }
    const auto p = calibrate(pts);
    EXPECT_NEAR(p.uj_per_node_visit, 0.02, 1e-9);
    EXPECT_NEAR(p.uj_per_sample_overhead, 0.3, 1e-9);
}

TEST(Calibrate, NegativeOverheadClampsToZero) {
    const std::vector<CalibrationPoint> pts = {{100, 10, 90.0}, {200, 10, 200.0}, {400, 10, 420.0}};
    const auto p = calibrate(pts);
    EXPECT_EQ(p.uj_per_sample_overhead, 0.0);
    EXPECT_NEAR(p.uj_per_node_visit, (100 * 90.0 + 200 * 200.0 + 400 * 420.0) / (100 * 100 + 200 * 200 + 400 * 400),
                1e-12);
    EXPECT_THROW(calibrate(std::vector<CalibrationPoint>{{0, 10, 5.0}}), Error);
}
