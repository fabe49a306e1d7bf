#pragma once

// Energy attribution for inference workloads.
//
// Two meters: a deterministic proxy (µJ linear in node visits and samples)
// and a reader for cumulative hardware energy counters laid out as
// <root>/<zone>/{energy_uj,max_energy_range_uj}.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greenflow/error.hpp"

namespace greenflow {

enum class MeterKind { Hardware, Proxy };

constexpr std::string_view to_string(MeterKind m) { return m == MeterKind::Hardware ? "hardware" : "proxy"; }

/// Placeholders, not measured truth. `calibrate` refits them.
struct CostModelParams {
    double uj_per_node_visit = 5e-3;
    double uj_per_sample_overhead = 0.5;

    void validate() const {
        if (!(uj_per_node_visit > 0.0) || !(uj_per_sample_overhead >= 0.0)) {
            fail(ErrorCode::InvalidArgument, "cost model needs uj_per_node_visit > 0 and overhead >= 0");
        }
    }
};

struct EnergyReport {
    double total_uj = 0.0;
    std::uint64_t samples = 0;
    double uwh_per_sample = 0.0;
    MeterKind meter = MeterKind::Proxy;
    unsigned repetitions = 1;
    bool low_confidence = false;
};

/// µWh per sample from a µJ total: (total_uj / 3600) / samples.
inline double uwh_per_sample(double total_uj, std::uint64_t samples) {
    return samples == 0 ? 0.0 : total_uj / 3600.0 / static_cast<double>(samples);
}

/// What a workload reports back after one pass.
struct WorkloadResult {
    std::uint64_t samples = 0;
    std::uint64_t node_visits = 0;
};

using Workload = std::function<WorkloadResult()>;

inline double proxy_uj(const CostModelParams& p, std::uint64_t node_visits, std::uint64_t samples) {
    return static_cast<double>(node_visits) * p.uj_per_node_visit +
           static_cast<double>(samples) * p.uj_per_sample_overhead;
}

inline EnergyReport measure_proxy(const Workload& work, const CostModelParams& params = {}) {
    params.validate();
    const WorkloadResult r = work();
    EnergyReport rep;
    rep.meter = MeterKind::Proxy;
    rep.samples = r.samples;
    rep.total_uj = proxy_uj(params, r.node_visits, r.samples);
    rep.uwh_per_sample = uwh_per_sample(rep.total_uj, rep.samples);
    return rep;
}

// ---------------------------------------------------------------------------
// Hardware counters

/// Counter delta corrected for at most one wrap of a counter that rolls over at `range`.
inline std::uint64_t wrap_delta(std::uint64_t before, std::uint64_t after, std::uint64_t range) {
    if (after >= before) {
        return after - before;
    }
    if (range == 0 || before >= range) {
        fail(ErrorCode::CounterUnavailable, "counter went backwards without a usable max range");
    }
    return (range - before) + after;
}

namespace detail {

inline std::optional<std::uint64_t> read_counter_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) {
        return std::nullopt;
    }
    std::uint64_t v = 0;
    if (!(in >> v)) {
        return std::nullopt;
    }
    return v;
}

} // namespace detail

struct CounterZone {
    std::filesystem::path dir;
    std::uint64_t max_range = 0;
};

class HardwareCounters {
public:
    static constexpr const char* kRootEnv = "GREENFLOW_RAPL_ROOT";

    static std::filesystem::path default_root() {
        if (const char* env = std::getenv(kRootEnv); env && *env) {
            return env;
        }
        return "/sys/class/powercap";
    }

    /// Top-level zones only (names with at most one ':'); subzones are
    /// already included in their parent's count.
    static HardwareCounters discover(const std::filesystem::path& root = default_root()) {
        std::vector<CounterZone> zones;
        std::error_code ec;
        for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
            const std::string name = entry.path().filename().string();
            if (std::count(name.begin(), name.end(), ':') > 1) {
                continue;
            }
            const auto energy = detail::read_counter_file(entry.path() / "energy_uj");
            const auto range = detail::read_counter_file(entry.path() / "max_energy_range_uj");
            if (energy && range) {
                zones.push_back({entry.path(), *range});
            }
        }
        if (ec || zones.empty()) {
            fail(ErrorCode::CounterUnavailable, "no readable energy counters under " + root.string());
        }
        std::sort(zones.begin(), zones.end(), [](const auto& a, const auto& b) { return a.dir < b.dir; });
        return HardwareCounters(std::move(zones));
    }

    explicit HardwareCounters(std::vector<CounterZone> zones) : zones_(std::move(zones)) {}

    const std::vector<CounterZone>& zones() const { return zones_; }

    std::vector<std::uint64_t> read_each() const {
        std::vector<std::uint64_t> out;
        out.reserve(zones_.size());
        for (const auto& z : zones_) {
            const auto v = detail::read_counter_file(z.dir / "energy_uj");
            if (!v) {
                fail(ErrorCode::CounterUnavailable, "cannot read " + (z.dir / "energy_uj").string());
            }
            out.push_back(*v);
        }
        return out;
    }

    /// Summed cumulative reading across zones, in µJ.
    std::uint64_t read() const {
        std::uint64_t sum = 0;
        for (auto v : read_each()) {
            sum += v;
        }
        return sum;
    }

    std::uint64_t delta(std::span<const std::uint64_t> before, std::span<const std::uint64_t> after) const {
        if (before.size() != zones_.size() || after.size() != zones_.size()) {
            fail(ErrorCode::LengthMismatch, "counter snapshot size does not match zone count");
        }
        std::uint64_t d = 0;
        for (std::size_t i = 0; i < zones_.size(); ++i) {
            d += wrap_delta(before[i], after[i], zones_[i].max_range);
        }
        return d;
    }

private:
    std::vector<CounterZone> zones_;
};

/// Only one hardware measurement window may be open per process.
class MeasurementGuard {
public:
    MeasurementGuard() {
        if (busy().exchange(true)) {
            fail(ErrorCode::MeasurementBusy, "another energy measurement is in progress");
        }
    }
    ~MeasurementGuard() { busy().store(false); }
    MeasurementGuard(const MeasurementGuard&) = delete;
    MeasurementGuard& operator=(const MeasurementGuard&) = delete;

    static bool active() { return busy().load(); }

private:
    static std::atomic<bool>& busy() {
        static std::atomic<bool> flag{false};
        return flag;
    }
};

struct HardwareOptions {
    unsigned max_repetitions = 64;
    std::uint64_t min_delta_uj = 1000;
};

/// Repeats the workload until the accumulated delta exceeds min_delta_uj or
/// max_repetitions is reached. Counters are read between repetitions so a
/// wrap in any single pass is corrected. A zero delta is reported as
/// low-confidence rather than thrown.
inline EnergyReport measure_hardware(const HardwareCounters& counters, const Workload& work,
                                     const HardwareOptions& opts = {}) {
    MeasurementGuard guard;
    EnergyReport rep;
    rep.meter = MeterKind::Hardware;
    rep.repetitions = 0;
    std::uint64_t total = 0;
    auto prev = counters.read_each();
    while (rep.repetitions < std::max(1u, opts.max_repetitions)) {
        const WorkloadResult r = work();
        const auto cur = counters.read_each();
        total += counters.delta(prev, cur);
        prev = cur;
        rep.samples += r.samples;
        ++rep.repetitions;
        if (total > opts.min_delta_uj) {
            break;
        }
    }
    rep.total_uj = static_cast<double>(total);
    rep.uwh_per_sample = uwh_per_sample(rep.total_uj, rep.samples);
    rep.low_confidence = total == 0;
    return rep;
}

/// Either meter behind one interface.
class Meter {
public:
    static Meter proxy(CostModelParams params = {}) {
        params.validate();
        Meter m;
        m.params_ = params;
        return m;
    }

    static Meter hardware(HardwareCounters counters, HardwareOptions opts = {}) {
        Meter m;
        m.kind_ = MeterKind::Hardware;
        m.counters_ = std::move(counters);
        m.opts_ = opts;
        return m;
    }

    MeterKind kind() const { return kind_; }
    const CostModelParams& params() const { return params_; }

    EnergyReport measure(const Workload& work) const {
        return kind_ == MeterKind::Proxy ? measure_proxy(work, params_) : measure_hardware(*counters_, work, opts_);
    }

private:
    Meter() = default;
    MeterKind kind_ = MeterKind::Proxy;
    CostModelParams params_;
    std::optional<HardwareCounters> counters_;
    HardwareOptions opts_;
};

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationPoint {
    std::uint64_t node_visits = 0;
    std::uint64_t samples = 0;
    double measured_uj = 0.0;
};

/// Least-squares fit of measured_uj ≈ a·node_visits + b·samples (no intercept).
/// A negative overhead is clamped to 0 and the visit cost refit alone.
inline CostModelParams calibrate(std::span<const CalibrationPoint> points) {
    double vv = 0, vs = 0, ss = 0, vy = 0, sy = 0;
    for (const auto& p : points) {
        const double v = static_cast<double>(p.node_visits);
        const double s = static_cast<double>(p.samples);
        vv += v * v;
        vs += v * s;
        ss += s * s;
        vy += v * p.measured_uj;
        sy += s * p.measured_uj;
    }
    CostModelParams out;
    const double det = vv * ss - vs * vs;
    if (det > 1e-12 * vv * ss) {
        out.uj_per_node_visit = (vy * ss - sy * vs) / det;
        out.uj_per_sample_overhead = (sy * vv - vy * vs) / det;
    } else {
        out.uj_per_sample_overhead = -1.0;
    }
    if (out.uj_per_sample_overhead < 0.0) {
        if (vv == 0.0) {
            fail(ErrorCode::InvalidArgument, "calibrate: no node visits in calibration data");
        }
        out.uj_per_sample_overhead = 0.0;
        out.uj_per_node_visit = vy / vv;
    }
    if (!(out.uj_per_node_visit > 0.0)) {
        fail(ErrorCode::InvalidArgument, "calibrate: fitted node-visit cost is not positive");
    }
    return out;
}

} // namespace greenflow
