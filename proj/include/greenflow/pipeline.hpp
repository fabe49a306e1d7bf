#pragma once

// End-to-end orchestration: captures + labels → dataset → split → search →
// variants → reports, plus error analysis and ablation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "greenflow/capture.hpp"
#include "greenflow/energy.hpp"
#include "greenflow/error.hpp"
#include "greenflow/features.hpp"
#include "greenflow/flowmeter.hpp"
#include "greenflow/forest.hpp"
#include "greenflow/metrics.hpp"
#include "greenflow/optimizer.hpp"
#include "greenflow/random.hpp"

namespace greenflow {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, std::string_view data) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        fail(ErrorCode::Io, "cannot write " + p.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorCode::Io, "sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline Dataset load_dataset(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + p.string());
    }
    return read_dataset(in);
}

inline void save_dataset(const fs::path& p, const std::vector<LabeledSample>& samples, const DatasetInfo& info = {}) {
    std::ostringstream out;
    write_dataset(out, samples, info);
    write_file(p, out.str());
}

// ---------------------------------------------------------------------------
// Dataset building

struct CaptureSummary {
    std::string name;
    std::string sha256;
    std::uint64_t records = 0;
    std::uint64_t packets = 0;
    std::uint64_t skipped = 0;
    std::uint64_t truncated = 0;
    std::uint64_t flows = 0;
    std::optional<std::string> error;
};

struct BuildOptions {
    FlowMeterConfig flow;
    std::int64_t label_tolerance_ms = 1000;
    AttackTypeMap attack_map = AttackTypeMap::defaults();
};

struct BuildResult {
    std::vector<LabeledSample> samples;
    DropReport drops;
    std::vector<CaptureSummary> captures;
    std::vector<std::string> label_errors;
};

/// Flows of one capture stream. Frames that are not decodable IP traffic are
/// counted and skipped.
inline std::vector<Flow> flows_from_capture(std::istream& in, const FlowMeterConfig& cfg, CaptureSummary& summary) {
    CaptureReader reader(in);
    FlowMeter meter(cfg);
    std::vector<Flow> flows;
    while (auto rec = reader.next()) {
        ++summary.records;
        const auto decoded = decode_frame(rec->frame, reader.header().link_type, rec->ts);
        if (const auto* p = std::get_if<ParsedPacket>(&decoded)) {
            ++summary.packets;
            meter.ingest(*p);
            auto closed = meter.take_closed();
            flows.insert(flows.end(), std::make_move_iterator(closed.begin()), std::make_move_iterator(closed.end()));
        } else {
            ++summary.skipped;
        }
    }
    summary.truncated = reader.stats().truncated;
    auto rest = meter.flush();
    flows.insert(flows.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
    FlowMeter::sort_flows(flows);
    summary.flows = flows.size();
    return flows;
}

/// Each capture gets its own flow meter; labels from all files are pooled.
/// A capture or label file that fails to parse is reported and skipped.
inline BuildResult build_dataset(const std::vector<fs::path>& captures, const std::vector<fs::path>& label_files,
                                 const BuildOptions& opts = {}) {
    BuildResult out;
    std::vector<LabelRecord> records;
    for (const auto& lf : label_files) {
        std::ifstream in(lf);
        if (!in) {
            out.label_errors.push_back(lf.filename().string() + ": cannot open");
            continue;
        }
        LabelFile parsed = parse_label_file(in);
        out.drops.malformed_label_rows += parsed.malformed_rows;
        records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                       std::make_move_iterator(parsed.records.end()));
    }
    for (const auto& cap : captures) {
        CaptureSummary summary;
        summary.name = cap.filename().string();
        try {
            const std::string bytes = read_file(cap);
            summary.sha256 = sha256_hex(bytes);
            std::istringstream in(bytes);
            auto flows = flows_from_capture(in, opts.flow, summary);
            auto joined = join_labels(std::move(flows), records, opts.label_tolerance_ms, opts.attack_map);
            out.drops.conflicting += joined.drops.conflicting;
            out.drops.unmatched += joined.drops.unmatched;
            for (const auto& f : joined.labeled) {
                out.samples.push_back(make_sample(f));
            }
        } catch (const Error& e) {
            summary.error = e.what();
        }
        out.captures.push_back(std::move(summary));
    }
    return out;
}

inline nlohmann::json to_json(const DropReport& d) {
    return {{"conflicting", d.conflicting}, {"unmatched", d.unmatched}, {"malformed_label_rows", d.malformed_label_rows}};
}

inline nlohmann::json build_report_json(const BuildResult& r) {
    nlohmann::json j;
    j["rows"] = r.samples.size();
    j["drops"] = to_json(r.drops);
    auto caps = nlohmann::json::array();
    for (const auto& c : r.captures) {
        nlohmann::json cj = {{"name", c.name},       {"sha256", c.sha256},       {"records", c.records},
                             {"packets", c.packets}, {"skipped", c.skipped},     {"truncated", c.truncated},
                             {"flows", c.flows},     {"error", c.error ? nlohmann::json(*c.error) : nlohmann::json()}};
        caps.push_back(std::move(cj));
    }
    j["captures"] = std::move(caps);
    j["label_errors"] = r.label_errors;
    return j;
}

inline DatasetInfo provenance(const BuildResult& r) {
    DatasetInfo info;
    for (const auto& c : r.captures) {
        info.notes.push_back("source " + c.name + " sha256=" + c.sha256);
    }
    return info;
}

// ---------------------------------------------------------------------------
// Split and ablation

struct Split {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
};

/// Seeded shuffle then cut; |train| = round(ratio * n).
inline Split split(const std::vector<LabeledSample>& samples, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        fail(ErrorCode::InvalidArgument, "split ratio must be in (0, 1)");
    }
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order.begin(), order.end());
    const auto cut = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(samples.size())));
    Split s;
    s.train.reserve(cut);
    s.test.reserve(samples.size() - cut);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? s.train : s.test).push_back(samples[order[i]]);
    }
    return s;
}

using SamplePredicate = std::function<bool(const LabeledSample&)>;

/// "attack_type=<type>" or "family=<name>".
inline SamplePredicate parse_predicate(std::string_view expr) {
    const auto eq = expr.find('=');
    if (eq == std::string_view::npos) {
        fail(ErrorCode::InvalidArgument, "predicate must look like field=value");
    }
    const std::string field(expr.substr(0, eq));
    const std::string value(expr.substr(eq + 1));
    if (field == "attack_type") {
        const auto t = parse_attack_type(value);
        if (!t) {
            fail(ErrorCode::InvalidArgument, "unknown attack type '" + value + "'");
        }
        return [t = *t](const LabeledSample& s) { return s.meta.attack_type == t; };
    }
    if (field == "family") {
        return [value](const LabeledSample& s) { return s.meta.family == value; };
    }
    fail(ErrorCode::InvalidArgument, "unknown predicate field '" + field + "'");
}

inline std::vector<LabeledSample> ablate(const std::vector<LabeledSample>& samples, const SamplePredicate& drop) {
    std::vector<LabeledSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (!drop(s)) {
            out.push_back(s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Error analysis

struct PairErrors {
    std::uint64_t count = 0;
    double first_ts_ms = 0.0;
    double last_ts_ms = 0.0;
};

struct ErrorBreakdown {
    std::map<std::pair<std::string, AttackType>, std::uint64_t> fn_by_family_and_attack;
    std::map<std::pair<std::string, std::string>, PairErrors> fn_by_endpoint_pair;
    std::uint64_t false_negatives = 0;
    std::uint64_t positives = 0;
    double fn_rate_overall = 0.0; // fn / actual malicious
    std::uint64_t malicious_pairs = 0;
    std::uint64_t detected_pairs = 0; // pairs with at least one detected malicious flow
    double pair_detection_rate = 0.0;
    double flow_detection_rate = 0.0;
};

inline ErrorBreakdown error_breakdown(std::span<const std::uint8_t> predictions,
                                      std::span<const LabeledSample> samples) {
    if (predictions.size() != samples.size()) {
        fail(ErrorCode::LengthMismatch, "error analysis: predictions and samples differ in length");
    }
    ErrorBreakdown b;
    std::map<std::pair<std::string, std::string>, bool> pair_detected;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.meta.src_ip.empty() || s.meta.dst_ip.empty() || s.meta.family.empty()) {
            fail(ErrorCode::MissingMetadata, "sample " + std::to_string(i) + " has no endpoint/family metadata");
        }
        if (s.cls != 1) {
            continue;
        }
        ++b.positives;
        const auto pair = std::make_pair(s.meta.src_ip, s.meta.dst_ip);
        auto& detected = pair_detected[pair];
        if (predictions[i] == 1) {
            detected = true;
            continue;
        }
        ++b.false_negatives;
        ++b.fn_by_family_and_attack[{s.meta.family, s.meta.attack_type}];
        auto [it, fresh] = b.fn_by_endpoint_pair.try_emplace(pair);
        PairErrors& pe = it->second;
        if (fresh) {
            pe.first_ts_ms = pe.last_ts_ms = s.meta.start_ms;
        }
        ++pe.count;
        pe.first_ts_ms = std::min(pe.first_ts_ms, s.meta.start_ms);
        pe.last_ts_ms = std::max(pe.last_ts_ms, s.meta.start_ms);
    }
    b.malicious_pairs = pair_detected.size();
    for (const auto& [_, d] : pair_detected) {
        b.detected_pairs += d ? 1 : 0;
    }
    if (b.positives) {
        b.fn_rate_overall = static_cast<double>(b.false_negatives) / static_cast<double>(b.positives);
        b.flow_detection_rate = 1.0 - b.fn_rate_overall;
    }
    if (b.malicious_pairs) {
        b.pair_detection_rate = static_cast<double>(b.detected_pairs) / static_cast<double>(b.malicious_pairs);
    }
    return b;
}

inline ErrorBreakdown error_analysis(const Model& model, std::span<const LabeledSample> test_set) {
    std::vector<std::uint8_t> preds;
    preds.reserve(test_set.size());
    for (const auto& s : test_set) {
        preds.push_back(model.predict(s.features).cls);
    }
    return error_breakdown(preds, test_set);
}

inline nlohmann::json to_json(const ErrorBreakdown& b) {
    nlohmann::json j;
    auto fam = nlohmann::json::array();
    for (const auto& [k, n] : b.fn_by_family_and_attack) {
        fam.push_back({{"family", k.first}, {"attack_type", std::string(to_string(k.second))}, {"count", n}});
    }
    auto pairs = nlohmann::json::array();
    for (const auto& [k, e] : b.fn_by_endpoint_pair) {
        pairs.push_back({{"src_ip", k.first},
                         {"dst_ip", k.second},
                         {"count", e.count},
                         {"first_ts_ms", e.first_ts_ms},
                         {"last_ts_ms", e.last_ts_ms}});
    }
    j["fn_by_family_and_attack"] = std::move(fam);
    j["fn_by_endpoint_pair"] = std::move(pairs);
    j["false_negatives"] = b.false_negatives;
    j["positives"] = b.positives;
    j["fn_rate_overall"] = b.fn_rate_overall;
    j["malicious_pairs"] = b.malicious_pairs;
    j["detected_pairs"] = b.detected_pairs;
    j["pair_detection_rate"] = b.pair_detection_rate;
    j["flow_detection_rate"] = b.flow_detection_rate;
    return j;
}

// ---------------------------------------------------------------------------
// Meters

enum class MeterChoice { Proxy, Hardware, Auto };

inline std::optional<MeterChoice> parse_meter_choice(std::string_view s) {
    if (s == "proxy") return MeterChoice::Proxy;
    if (s == "hardware") return MeterChoice::Hardware;
    if (s == "auto") return MeterChoice::Auto;
    return std::nullopt;
}

/// Hardware throws CounterUnavailable when no counters exist; Auto falls
/// back to the proxy instead.
inline Meter make_meter(MeterChoice choice, const CostModelParams& params = {}) {
    if (choice == MeterChoice::Proxy) {
        return Meter::proxy(params);
    }
    try {
        return Meter::hardware(HardwareCounters::discover());
    } catch (const Error& e) {
        if (choice == MeterChoice::Hardware || e.code() != ErrorCode::CounterUnavailable) {
            throw;
        }
        return Meter::proxy(params);
    }
}

// ---------------------------------------------------------------------------
// Experiments

struct VariantResult {
    Variant variant = Variant::Default;
    std::size_t trial_index = 0;
    Hyperparams hp;
    ConfusionMatrix cm;
    double mcc = 0.0;
    double balanced_accuracy = 0.0;
    double f1 = 0.0;
    EnergyReport energy;
    std::shared_ptr<const Model> model;
};

inline VariantResult score(Variant v, std::size_t trial_index, std::shared_ptr<const Model> model,
                           const TrainingData& test, const Meter& meter) {
    VariantResult r;
    r.variant = v;
    r.trial_index = trial_index;
    r.hp = model->hp;
    const Evaluation ev = evaluate(*model, test, meter);
    r.cm = ev.cm;
    r.mcc = mcc(ev.cm);
    r.balanced_accuracy = balanced_accuracy(ev.cm);
    r.f1 = f1(ev.cm);
    r.energy = ev.energy;
    r.model = std::move(model);
    return r;
}

struct AlgorithmRun {
    Algorithm algorithm = Algorithm::SingleTree;
    std::vector<Trial> trials;
    std::vector<VariantResult> variants;
    std::optional<std::string> error; // set when the run stopped early
};

struct ExperimentConfig {
    double split_ratio = 0.8;
    std::uint64_t seed = 42;
    std::vector<Algorithm> algorithms{Algorithm::SingleTree};
    std::size_t n_trials = 64;
    SearchSpace space;
    /// Search on the test split itself rather than a validation carve-out.
    bool search_on_test = false;
    double validation_ratio = 0.1;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t search_train_rows = 0;
    std::size_t search_holdout_rows = 0;
    std::vector<AlgorithmRun> runs;
    std::vector<std::string> log;
};

/// Variants are the searched trial models themselves, re-scored on the test split.
inline ExperimentResult run_experiment(const std::vector<LabeledSample>& samples, const ExperimentConfig& cfg,
                                       const Meter& meter) {
    if (samples.empty()) {
        fail(ErrorCode::EmptyDataset, "experiment: dataset is empty");
    }
    if (cfg.n_trials < 1) {
        fail(ErrorCode::InvalidArgument, "experiment: n_trials must be >= 1");
    }
    ExperimentResult res;
    res.config = cfg;
    const Split outer = split(samples, cfg.split_ratio, cfg.seed);
    res.train_rows = outer.train.size();
    res.test_rows = outer.test.size();
    const TrainingData test = TrainingData::from_samples(outer.test);
    TrainingData search_train = TrainingData::from_samples(outer.train);
    TrainingData search_holdout = test;
    if (!cfg.search_on_test) {
        const Split inner = split(outer.train, 1.0 - cfg.validation_ratio, derive_seed(cfg.seed, "validation"));
        search_train = TrainingData::from_samples(inner.train);
        search_holdout = TrainingData::from_samples(inner.test);
    }
    res.search_train_rows = search_train.rows();
    res.search_holdout_rows = search_holdout.rows();
    res.log.push_back("seed " + std::to_string(cfg.seed));
    res.log.push_back("rows train=" + std::to_string(res.train_rows) + " test=" + std::to_string(res.test_rows) +
                      " search_train=" + std::to_string(res.search_train_rows) +
                      " search_holdout=" + std::to_string(res.search_holdout_rows));
    res.log.push_back(std::string("meter ") + std::string(to_string(meter.kind())));

    for (const Algorithm algo : cfg.algorithms) {
        AlgorithmRun run;
        run.algorithm = algo;
        try {
            SearchOptions so;
            so.n_trials = cfg.n_trials;
            so.seed = derive_seed(cfg.seed, std::string("search-") + std::string(to_string(algo)));
            run.trials = run_search(search_train, search_holdout, algo, cfg.space, so, meter);
            std::size_t failed = 0;
            for (const auto& t : run.trials) {
                failed += t.ok() ? 0 : 1;
            }
            res.log.push_back(std::string(to_string(algo)) + ": " + std::to_string(run.trials.size()) + " trials, " +
                              std::to_string(failed) + " failed, front size " +
                              std::to_string(pareto_front(run.trials).size()));
            const Hyperparams def = Hyperparams::defaults(algo);
            for (const Variant v : kAllVariants) {
                const auto pos = select_variant(run.trials, v, def);
                const Trial& t = run.trials[pos];
                run.variants.push_back(score(v, t.index, t.model, test, meter));
                res.log.push_back(std::string(to_string(algo)) + " " + std::string(to_string(v)) + ": trial " +
                                  std::to_string(t.index));
            }
        } catch (const Error& e) {
            run.error = e.what();
            res.log.push_back(std::string(to_string(algo)) + ": stopped: " + e.what());
        }
        res.runs.push_back(std::move(run));
    }
    return res;
}

inline nlohmann::json report_json(const VariantResult& r, std::uint64_t seed) {
    nlohmann::json j;
    j["variant"] = std::string(to_string(r.variant));
    j["algorithm"] = std::string(to_string(r.hp.algorithm));
    j["seed"] = seed;
    j["trial_index"] = r.trial_index;
    j["hyperparams"] = hyperparams_to_json(r.hp);
    j["mcc"] = r.mcc;
    j["balanced_accuracy"] = r.balanced_accuracy;
    j["f1"] = r.f1;
    j["mcc_percent"] = 100.0 * r.mcc;
    j["balanced_accuracy_percent"] = 100.0 * r.balanced_accuracy;
    j["f1_percent"] = 100.0 * r.f1;
    j["uwh_per_sample"] = r.energy.uwh_per_sample;
    j["energy"] = {{"meter", std::string(to_string(r.energy.meter))},
                   {"total_uj", r.energy.total_uj},
                   {"samples", r.energy.samples},
                   {"repetitions", r.energy.repetitions},
                   {"low_confidence", r.energy.low_confidence}};
    j["confusion"] = {{"tp", r.cm.tp}, {"tn", r.cm.tn}, {"fp", r.cm.fp}, {"fn", r.cm.fn}};
    return j;
}

inline std::string summary_header() {
    return "algorithm,variant,max_depth,min_samples_leaf,min_samples_split,max_features,n_estimators,mcc,"
           "balanced_accuracy_percent,f1_percent,uwh_per_sample";
}

inline std::string summary_row(const VariantResult& r) {
    char buf[512];
    const std::string depth = r.hp.max_depth ? std::to_string(*r.hp.max_depth) : "none";
    const std::string est = r.hp.algorithm == Algorithm::SingleTree ? "-" : std::to_string(r.hp.n_estimators);
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%d,%s,%s,%.4f,%.2f,%.2f,%.6g", std::string(to_string(r.hp.algorithm)).c_str(),
                  std::string(to_string(r.variant)).c_str(), depth.c_str(), r.hp.min_samples_leaf,
                  r.hp.min_samples_split, r.hp.max_features.to_string().c_str(), est.c_str(), r.mcc,
                  100.0 * r.balanced_accuracy, 100.0 * r.f1, r.energy.uwh_per_sample);
    return buf;
}

inline std::string summary_csv(const ExperimentResult& res) {
    std::string out = summary_header() + "\n";
    for (const auto& run : res.runs) {
        for (const auto& v : run.variants) {
            out += summary_row(v) + "\n";
        }
        if (run.error) {
            out += std::string(to_string(run.algorithm)) + ",partial,,,,,,,,,\n";
        }
    }
    return out;
}

/// Layout:
///   summary.csv, run.log, config.json
///   <algorithm>/trials.csv, front.json, plot.dat
///   <algorithm>/reports/<variant>.json, <algorithm>/models/<variant>.json
///   <algorithm>/PARTIAL (only when the run stopped early)
inline void write_experiment(const fs::path& dir, const ExperimentResult& res) {
    fs::create_directories(dir);
    const auto& cfg = res.config;
    nlohmann::json cj;
    cj["seed"] = cfg.seed;
    cj["split_ratio"] = cfg.split_ratio;
    cj["n_trials"] = cfg.n_trials;
    cj["search_on_test"] = cfg.search_on_test;
    cj["validation_ratio"] = cfg.validation_ratio;
    auto algos = nlohmann::json::array();
    for (auto a : cfg.algorithms) {
        algos.push_back(std::string(to_string(a)));
    }
    cj["algorithms"] = std::move(algos);
    cj["rows"] = {{"train", res.train_rows},
                  {"test", res.test_rows},
                  {"search_train", res.search_train_rows},
                  {"search_holdout", res.search_holdout_rows}};
    write_file(dir / "config.json", cj.dump(2) + "\n");

    for (const auto& run : res.runs) {
        const fs::path adir = dir / std::string(to_string(run.algorithm));
        fs::create_directories(adir);
        std::ostringstream trials;
        write_trials_csv(trials, run.trials);
        write_file(adir / "trials.csv", trials.str());
        write_file(adir / "front.json", front_to_json(run.trials).dump(2) + "\n");
        std::ostringstream plot;
        if (!run.trials.empty()) {
            write_plot_data(plot, run.trials, Hyperparams::defaults(run.algorithm));
        }
        write_file(adir / "plot.dat", plot.str());
        for (const auto& v : run.variants) {
            const std::string name(to_string(v.variant));
            write_file(adir / "reports" / (name + ".json"), report_json(v, cfg.seed).dump(2) + "\n");
            write_file(adir / "models" / (name + ".json"), serialize(*v.model) + "\n");
        }
        if (run.error) {
            write_file(adir / "PARTIAL", *run.error + "\n");
        } else if (fs::exists(adir / "PARTIAL")) {
            fs::remove(adir / "PARTIAL");
        }
    }
    write_file(dir / "summary.csv", summary_csv(res));
    std::string log;
    for (const auto& l : res.log) {
        log += l + "\n";
    }
    write_file(dir / "run.log", log);
}

// ---------------------------------------------------------------------------
// Ablation comparison

struct AblationResult {
    std::size_t rows_before = 0;
    std::size_t rows_after = 0;
    std::vector<VariantResult> before;
    std::vector<VariantResult> after;
};

/// Retrains each hyperparameter set on the full and on the reduced dataset.
/// Both are split with the same ratio and seed; nothing is re-optimized.
inline AblationResult ablation_study(const std::vector<LabeledSample>& samples, const SamplePredicate& drop,
                                     const std::vector<std::pair<Variant, Hyperparams>>& configs, double ratio,
                                     std::uint64_t seed,
                                     const Meter& meter) {
    AblationResult out;
    const auto reduced = ablate(samples, drop);
    out.rows_before = samples.size();
    out.rows_after = reduced.size();
    auto run = [&](const std::vector<LabeledSample>& data, std::vector<VariantResult>& dst) {
        const Split s = split(data, ratio, seed);
        const TrainingData tr = TrainingData::from_samples(s.train);
        const TrainingData te = TrainingData::from_samples(s.test);
        for (std::size_t i = 0; i < configs.size(); ++i) {
            auto model = std::make_shared<Model>(train(tr, configs[i].second, derive_seed(seed, i)));
            dst.push_back(score(configs[i].first, i, std::move(model), te, meter));
        }
    };
    run(samples, out.before);
    run(reduced, out.after);
    return out;
}

} // namespace greenflow
