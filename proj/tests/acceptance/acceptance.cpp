// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <unistd.h>

#include "fixtures/pareto_fixtures.hpp"
#include "greenflow/greenflow.hpp"

using namespace greenflow;

namespace {

const std::string kFixtures = GREENFLOW_FIXTURE_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && pass) {
            pass = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && secs >= limit_s) {
        o.pass = false;
        o.detail = "runtime " + std::to_string(secs) + " s over the " + std::to_string(limit_s) + " s limit";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%d] %s (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.empty() ? "" : ": ",
                o.detail.c_str());
    std::fflush(stdout);
}

template <std::size_t N>
std::vector<Trial> trials_from(const std::array<std::pair<double, double>, N>& pts) {
    std::vector<Trial> out;
    for (std::size_t i = 0; i < N; ++i) {
        out.push_back(make_point(i, pts[i].first, pts[i].second));
        out.back().hp.max_depth = 1;
    }
    return out;
}

std::vector<std::size_t> brute_front(const std::vector<Trial>& t) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < t.size(); ++j) dominated = dominated || dominates(t[j], t[i]);
        if (!dominated) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

bool close_rel(double a, double b, double rel) {
    return a == b || std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("greenflow_accept_" + std::to_string(::getpid()) + "_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return out;
}

Outcome before_ablation_selection() {
    Outcome o;
    const auto t = trials_from(fixtures::kSearchBefore);
    o.require(t.size() == 67, "fixture must hold 67 points");
    o.require(sorted(pareto_front(t)) == brute_front(t), "front differs from brute force");
    const Hyperparams none = Hyperparams::defaults(Algorithm::SingleTree);
    const auto& g = t[select_variant(t, Variant::MaxGreen, none)];
    const auto& m = t[select_variant(t, Variant::MaxMcc, none)];
    const auto& b = t[select_variant(t, Variant::Balanced, none)];
    o.require(g.uwh_per_sample == 6.502 && g.mcc == 0.239, "max-green is not (6.502, 0.239)");
    o.require(m.uwh_per_sample == 8.139 && m.mcc == 0.609, "max-MCC is not (8.139, 0.609)");
    o.require(b.uwh_per_sample == 7.9394830350169405 && b.mcc == 0.6066392938884424,
              "balanced is not (7.9394830350169405, 0.6066392938884424)");
    o.detail = o.pass ? "green (6.502, 0.239), MCC (8.139, 0.609), balanced (7.93948, 0.60664)" : o.detail;
    return o;
}

Outcome after_ablation_selection() {
    Outcome o;
    const auto t = trials_from(fixtures::kSearchAfterAblation);
    const auto front = pareto_front(t);
    o.require(front.size() == 5, "front size " + std::to_string(front.size()) + ", expected 5");
    o.require(sorted(front) == brute_front(t), "front differs from brute force");
    for (auto i : front) {
        for (auto j : front) o.require(!dominates(t[i], t[j]), "a front member dominates another");
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (std::find(front.begin(), front.end(), k) != front.end()) continue;
        bool dominated = false;
        for (auto i : front) dominated = dominated || dominates(t[i], t[k]);
        o.require(dominated, "point " + std::to_string(k) + " off the front is not dominated");
    }
    const auto& b = t[select_balanced(t)];
    o.require(b.uwh_per_sample == 2.355157664124037 && b.mcc == 0.9995017385262959,
              "balanced is not (2.355157664124037, 0.9995017385262959)");
    o.detail = o.pass ? "front of 5, balanced (2.355158, 0.999502)" : o.detail;
    return o;
}

Outcome metric_closed_forms() {
    Outcome o;
    Rng rng(2024);
    for (int round = 0; round < 10000 && o.pass; ++round) {
        const std::size_t n = 1 + rng.index(400);
        const double p = rng.unit(), acc = rng.unit();
        std::vector<std::uint8_t> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = rng.bernoulli(p);
            pred[i] = rng.bernoulli(acc) ? truth[i] : static_cast<std::uint8_t>(1 - truth[i]);
        }
        long double tp = 0, tn = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            (pred[i] ? (truth[i] ? tp : fp) : (truth[i] ? fn : tn)) += 1;
        }
        const auto cm = confusion(pred, truth);
        o.require(cm.tp == tp && cm.tn == tn && cm.fp == fp && cm.fn == fn, "confusion recount differs");
        const long double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
        const long double want_mcc = den == 0 ? 0.0L : (tp * tn - fp * fn) / std::sqrt(den);
        const long double tpr = tp + fn > 0 ? tp / (tp + fn) : 0.0L;
        const long double tnr = tn + fp > 0 ? tn / (tn + fp) : 0.0L;
        const long double want_ba = (tpr + tnr) / 2;
        const long double want_f1 = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0L;
        o.require(close_rel(mcc(cm), static_cast<double>(want_mcc), 1e-12), "mcc off at round " + std::to_string(round));
        o.require(close_rel(balanced_accuracy(cm), static_cast<double>(want_ba), 1e-12), "balanced accuracy off");
        o.require(close_rel(f1(cm), static_cast<double>(want_f1), 1e-12), "F1 off");
    }
    for (const auto& cm : {ConfusionMatrix{0, 10, 0, 0}, ConfusionMatrix{10, 0, 0, 0}, ConfusionMatrix{5, 0, 5, 0},
                           ConfusionMatrix{0, 5, 0, 5}, ConfusionMatrix{}}) {
        o.require(mcc(cm) == 0.0, "degenerate matrix does not give MCC 0");
    }
    o.detail = o.pass ? "10000 random matrices within 1e-12" : o.detail;
    return o;
}

Outcome tree_correctness() {
    Outcome o;
    Rng rng(4242);
    for (int round = 0; round < 100 && o.pass; ++round) {
        const std::size_t n = 2 + rng.index(499);
        const std::size_t d = 1 + rng.index(10);
        TrainingData data(d);
        std::map<std::vector<double>, std::uint8_t> seen; // keeps the set consistent
        std::vector<double> x(d);
        while (data.rows() < n) {
            for (auto& v : x) v = static_cast<double>(rng.index(8)) + (rng.bernoulli(0.5) ? 0.5 : 0.0);
            const auto y = static_cast<std::uint8_t>(rng.index(2));
            const auto [it, fresh] = seen.try_emplace(x, y);
            data.add(x, it->second);
            if (!fresh && seen.size() < 2 && data.rows() > 64) break;
        }
        const Model full = train(data, Hyperparams::defaults(Algorithm::SingleTree), static_cast<std::uint64_t>(round));
        std::size_t errors = 0;
        for (std::size_t i = 0; i < data.rows(); ++i) errors += full.predict(data.row(i)).cls != data.labels[i];
        o.require(errors == 0, "default tree made " + std::to_string(errors) + " training errors");

        Hyperparams stump = Hyperparams::defaults(Algorithm::SingleTree);
        stump.max_depth = 1;
        const Model m = train(data, stump, 0);
        if (m.trees[0].nodes.size() == 1) continue; // pure data: no feature at all
        const auto f = static_cast<std::size_t>(m.trees[0].nodes[0].feature);
        // Permute every other column across rows.
        std::vector<std::size_t> perm(data.rows());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm.begin(), perm.end());
        for (std::size_t i = 0; i < data.rows(); ++i) {
            std::vector<double> row(data.row(i).begin(), data.row(i).end());
            const auto other = data.row(perm[i]);
            for (std::size_t k = 0; k < d; ++k) {
                if (k != f) row[k] = other[k];
            }
            o.require(m.predict(row).cls == m.predict(data.row(i)).cls, "depth-1 tree depends on a second feature");
        }
    }
    o.detail = o.pass ? "100 datasets fit exactly; stumps use one feature" : o.detail;
    return o;
}

Outcome energy_ordering() {
    Outcome o;
    SyntheticConfig sc;
    sc.sessions = 6000;
    sc.seed = 42;
    const auto data = synthetic_samples(sc);
    o.require(data.size() >= 5000, "synthetic dataset has only " + std::to_string(data.size()) + " flows");
    ExperimentConfig cfg;
    cfg.n_trials = 64;
    cfg.search_on_test = true;
    const Meter meter = Meter::proxy();
    const auto res = run_experiment(data, cfg, meter);
    const auto& run = res.runs.at(0);
    o.require(!run.error, "search stopped");
    std::map<Variant, double> uwh;
    for (const auto& v : run.variants) uwh[v.variant] = v.energy.uwh_per_sample;
    for (auto v : kAllVariants) {
        o.require(uwh.at(Variant::MaxGreen) <= uwh.at(v), "max-green costs more than " + std::string(to_string(v)));
    }
    const Split s = split(data, cfg.split_ratio, cfg.seed);
    const auto tr = TrainingData::from_samples(s.train);
    const auto te = TrainingData::from_samples(s.test);
    char buf[256];
    std::string detail;
    for (auto algo : {Algorithm::RandomForest, Algorithm::ExtraTrees}) {
        const Model m = train(tr, Hyperparams::defaults(algo), derive_seed(cfg.seed, std::string(to_string(algo))));
        const double e = evaluate(m, te, meter).energy.uwh_per_sample;
        o.require(e > uwh.at(Variant::Default),
                  std::string(to_string(algo)) + " default does not cost more than the single-tree default");
        std::snprintf(buf, sizeof buf, ", %s default %.6g", std::string(to_string(algo)).c_str(), e);
        detail += buf;
    }
    std::snprintf(buf, sizeof buf, "%zu flows; single-tree default %.6g, max-green %.6g", data.size(),
                  uwh.at(Variant::Default), uwh.at(Variant::MaxGreen));
    o.detail = o.pass ? std::string(buf) + detail + " µWh/sample" : o.detail;
    return o;
}

Outcome golden_vectors() {
    Outcome o;
    std::ifstream in(kFixtures + "/golden_12.pcap", std::ios::binary);
    CaptureReader reader(in);
    FlowMeter meter;
    while (auto rec = reader.next()) {
        const auto dec = decode_frame(rec->frame, reader.header().link_type, rec->ts);
        if (const auto* p = std::get_if<ParsedPacket>(&dec)) meter.ingest(*p);
    }
    const auto flows = meter.flush();
    o.require(flows.size() == 3, "expected 3 flows, got " + std::to_string(flows.size()));
    if (!o.pass) return o;
    using Block = std::array<double, kViewFeatureCount>;
    auto vec = [](double proto, const Block& bi, const Block& s2d, const Block& d2s) {
        FeatureVector v{};
        v[0] = proto;
        v[1] = 4;
        std::copy(bi.begin(), bi.end(), v.begin() + view_offset(View::Bidirectional));
        std::copy(s2d.begin(), s2d.end(), v.begin() + view_offset(View::SrcToDst));
        std::copy(d2s.begin(), d2s.end(), v.begin() + view_offset(View::DstToSrc));
        return v;
    };
    const Block c_one = {0, 0, 0, 0, 0, 40, 40, 40, 40, 0, 1, 0, 1, 1, 0, 0, 0, 1, 0};
    const FeatureVector want[3] = {
        vec(6, {110, 30, 10, 110.0 / 7, 9.759000729485331, 920, 540, 40, 115, 175.2549163769328, 8, 7, 0, 0, 2, 2, 0, 2, 0},
            {110, 40, 20, 27.5, 9.574271077563381, 300, 140, 40, 60, 44.721359549995796, 5, 4, 0, 0, 1, 1, 0, 1, 0},
            {90, 70, 20, 45, 35.35533905932738, 620, 540, 40, 206.66666666666666, 288.67513459481285, 3, 3, 0, 0, 1, 1,
             0, 1, 0}),
        vec(17, {170, 155, 15, 85, 98.99494936611666, 240, 120, 60, 80, 34.64101615137755, 3},
            {170, 170, 170, 170, 0, 120, 60, 60, 60, 0, 2}, {0, 0, 0, 0, 0, 120, 120, 120, 120, 0, 1}),
        vec(6, c_one, c_one, Block{}),
    };
    for (std::size_t f = 0; f < 3; ++f) {
        const auto got = vectorize(flows[f]);
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            o.require(close_rel(got[i], want[f][i], 1e-12),
                      "flow " + std::to_string(f) + " feature " + feature_names()[i] + " = " +
                          std::to_string(got[i]) + ", expected " + std::to_string(want[f][i]));
        }
        const auto at = [&](View v, ViewField k) { return got[feature_index(v, k)]; };
        for (auto k : {ViewField::Bytes, ViewField::Packets, ViewField::Ack, ViewField::Syn, ViewField::Fin}) {
            o.require(at(View::Bidirectional, k) == at(View::SrcToDst, k) + at(View::DstToSrc, k),
                      "directional additivity broken");
        }
    }
    o.detail = o.pass ? "3 flows x 59 values match the hand worksheet" : o.detail;
    return o;
}

Outcome ablation_direction() {
    Outcome o;
    SyntheticConfig sc;
    sc.sessions = 6000;
    sc.seed = 7;
    const auto data = synthetic_samples(sc);
    const auto r = ablation_study(data, parse_predicate("attack_type=port-scan"),
                                  {{Variant::Default, Hyperparams::defaults(Algorithm::SingleTree)}}, 0.8, 42,
                                  Meter::proxy());
    const auto& b = r.before.at(0);
    const auto& a = r.after.at(0);
    o.require(a.mcc > b.mcc, "MCC did not increase");
    o.require(a.energy.uwh_per_sample < b.energy.uwh_per_sample, "µWh/sample did not decrease");
    char buf[256];
    std::snprintf(buf, sizeof buf, "rows %zu -> %zu; MCC %.4f -> %.4f; µWh/sample %.6g -> %.6g", r.rows_before,
                  r.rows_after, b.mcc, a.mcc, b.energy.uwh_per_sample, a.energy.uwh_per_sample);
    o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
    return o;
}

std::map<std::string, std::string> end_to_end(const fs::path& dir) {
    SyntheticConfig sc;
    sc.sessions = 2000;
    sc.seed = 11;
    sc.unlabeled = 20;
    sc.conflicting = 10;
    const auto traffic = generate_traffic(sc);
    {
        std::ofstream cap(dir / "in" / "capture.pcap", std::ios::binary);
        write_capture(cap, traffic.packets);
        std::ofstream lab(dir / "in" / "capture.labels");
        write_label_file(lab, traffic.labels);
    }
    const auto built = build_dataset({dir / "in" / "capture.pcap"}, {dir / "in" / "capture.labels"});
    save_dataset(dir / "out" / "dataset.csv", built.samples, provenance(built));
    write_file(dir / "out" / "build.json", build_report_json(built).dump(2));
    ExperimentConfig cfg;
    cfg.n_trials = 16;
    cfg.algorithms = {Algorithm::SingleTree, Algorithm::ExtraTrees};
    cfg.space.n_estimators = {10, 30};
    const auto samples = load_dataset(dir / "out" / "dataset.csv").samples;
    write_experiment(dir / "out" / "experiment", run_experiment(samples, cfg, Meter::proxy()));
    return read_tree(dir / "out");
}

Outcome determinism() {
    Outcome o;
    const auto a_dir = temp_dir("det_a"), b_dir = temp_dir("det_b");
    fs::create_directories(a_dir / "in");
    fs::create_directories(b_dir / "in");
    const auto a = end_to_end(a_dir);
    const auto b = end_to_end(b_dir);
    o.require(a.size() == b.size(), "different file sets");
    std::size_t bytes = 0;
    for (const auto& [name, content] : a) {
        const auto it = b.find(name);
        o.require(it != b.end() && it->second == content, name + " differs");
        bytes += content.size();
    }
    for (const char* must : {"dataset.csv", "experiment/single-tree/trials.csv", "experiment/single-tree/front.json",
                             "experiment/extra-trees/reports/balanced.json", "experiment/summary.csv"}) {
        o.require(a.count(must) == 1, std::string("missing ") + must);
    }
    fs::remove_all(a_dir);
    fs::remove_all(b_dir);
    o.detail = o.pass ? std::to_string(a.size()) + " files, " + std::to_string(bytes) + " bytes identical" : o.detail;
    return o;
}

Outcome hardware_unit_law() {
    Outcome o;
    const auto root = temp_dir("rapl");
    fs::create_directories(root / "intel-rapl:0");
    fs::create_directories(root / "intel-rapl:1");
    const std::uint64_t range0 = 262143328850ULL, range1 = 65532610987ULL;
    std::ofstream(root / "intel-rapl:0" / "max_energy_range_uj") << range0 << '\n';
    std::ofstream(root / "intel-rapl:1" / "max_energy_range_uj") << range1 << '\n';
    std::uint64_t c0 = range0 - 50, c1 = range1 - 30;
    auto store = [&] {
        std::ofstream(root / "intel-rapl:0" / "energy_uj") << c0 << '\n';
        std::ofstream(root / "intel-rapl:1" / "energy_uj") << c1 << '\n';
    };
    store();
    ::setenv(HardwareCounters::kRootEnv, root.c_str(), 1);
    const Meter meter = Meter::hardware(HardwareCounters::discover());
    ::unsetenv(HardwareCounters::kRootEnv);
    std::uint64_t expected = 0;
    unsigned wraps = 0;
    const std::uint64_t steps[] = {333, 501, 97};
    std::size_t k = 0;
    const auto rep = meter.measure([&] {
        const std::uint64_t s = steps[k++ % 3];
        const std::uint64_t n0 = c0 + s, n1 = c1 + 2 * s;
        wraps += (n0 >= range0) + (n1 >= range1);
        c0 = n0 % range0;
        c1 = n1 % range1;
        expected += 3 * s;
        store();
        return WorkloadResult{7, 0};
    });
    fs::remove_all(root);
    o.require(wraps >= 2, "the test double did not wrap both counters");
    o.require(rep.total_uj == static_cast<double>(expected),
              "total " + std::to_string(rep.total_uj) + " µJ, expected " + std::to_string(expected));
    const double back = rep.uwh_per_sample * 3600.0 * static_cast<double>(rep.samples);
    o.require(std::abs(back - rep.total_uj) <= std::nextafter(rep.total_uj, INFINITY) - rep.total_uj,
              "uwh x 3600 x samples does not reconstruct the total");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%u repetitions, %u wraps, %.0f µJ exact, %.9g µWh/sample", rep.repetitions, wraps,
                  rep.total_uj, rep.uwh_per_sample);
    o.detail = o.pass ? buf : o.detail;
    return o;
}

} // namespace

int main() {
    criterion(1, "reference scatter before ablation: variant selection", 1.0, before_ablation_selection);
    criterion(2, "reference scatter after ablation: balanced selection", 1.0, after_ablation_selection);
    criterion(3, "metric closed forms", 60.0, metric_closed_forms);
    criterion(4, "tree correctness", 60.0, tree_correctness);
    criterion(5, "energy ordering", 300.0, energy_ordering);
    criterion(6, "flow/feature golden capture", 1.0, golden_vectors);
    criterion(7, "ablation direction", 120.0, ablation_direction);
    criterion(8, "end-to-end determinism", 300.0, determinism);
    criterion(9, "hardware meter unit law and wraparound", 10.0, hardware_unit_law);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
