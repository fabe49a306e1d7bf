// greenflow command-line tool.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 measurement unavailable.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "greenflow/greenflow.hpp"

using namespace greenflow;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitMeasurement = 4;

int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingDefaultTrial: return kExitConfig;
    case ErrorCode::CounterUnavailable:
    case ErrorCode::BelowResolution:
    case ErrorCode::MeasurementBusy: return kExitMeasurement;
    default: return kExitData;
    }
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file(path, text);
    }
}

struct HpFlags {
    std::string algorithm = "single-tree";
    std::string max_depth = "none";
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    std::string max_features; // empty: the algorithm's default
    int n_estimators = 100;

    void add(CLI::App* app) {
        app->add_option("--algorithm", algorithm, "single-tree, random-forest or extra-trees")->capture_default_str();
        app->add_option("--max-depth", max_depth, "positive integer or 'none'")->capture_default_str();
        app->add_option("--min-samples-leaf", min_samples_leaf)->capture_default_str();
        app->add_option("--min-samples-split", min_samples_split)->capture_default_str();
        app->add_option("--max-features", max_features, "integer, 'sqrt' or 'all'");
        app->add_option("--n-estimators", n_estimators, "ignored for single-tree")->capture_default_str();
    }

    Hyperparams resolve() const {
        const auto algo = parse_algorithm(algorithm);
        if (!algo) fail(ErrorCode::InvalidArgument, "unknown algorithm '" + algorithm + "'");
        Hyperparams hp = Hyperparams::defaults(*algo);
        if (max_depth != "none") {
            try {
                hp.max_depth = std::stoi(max_depth);
            } catch (const std::exception&) {
                fail(ErrorCode::InvalidArgument, "max-depth must be an integer or 'none'");
            }
        }
        hp.min_samples_leaf = min_samples_leaf;
        hp.min_samples_split = min_samples_split;
        if (!max_features.empty()) {
            const auto mf = MaxFeatures::parse(max_features);
            if (!mf) fail(ErrorCode::InvalidArgument, "max-features must be an integer, 'sqrt' or 'all'");
            hp.max_features = *mf;
        }
        hp.n_estimators = n_estimators;
        hp.validate();
        return hp;
    }
};

struct MeterFlags {
    std::string meter = "proxy";
    CostModelParams cost;

    void add(CLI::App* app) {
        app->add_option("--meter", meter, "proxy, hardware or auto")->capture_default_str();
        app->add_option("--uj-per-visit", cost.uj_per_node_visit, "proxy cost per node visit (µJ)")
            ->capture_default_str();
        app->add_option("--uj-per-sample", cost.uj_per_sample_overhead, "proxy overhead per sample (µJ)")
            ->capture_default_str();
    }

    Meter resolve() const {
        const auto choice = parse_meter_choice(meter);
        if (!choice) fail(ErrorCode::InvalidArgument, "unknown meter '" + meter + "'");
        return make_meter(*choice, cost);
    }
};

IntRange parse_range(const std::string& s, const char* name) {
    const auto colon = s.find(':');
    try {
        if (colon == std::string::npos) {
            const int v = std::stoi(s);
            return {v, v};
        }
        return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    } catch (const std::exception&) {
        fail(ErrorCode::InvalidArgument, std::string(name) + " must look like lo:hi");
    }
}

struct RunFlags {
    double split_ratio = 0.8;
    std::uint64_t seed = 42;
    std::vector<std::string> algorithms{"single-tree"};
    std::size_t n_trials = 64;
    bool search_on_test = false;
    double validation_ratio = 0.1;
    std::string space_depth = "1:200", space_leaf = "1:10", space_split = "2:30", space_features = "1:59",
                space_estimators = "10:256";

    void add(CLI::App* app) {
        app->add_option("--split-ratio", split_ratio, "train fraction in (0,1)")->capture_default_str();
        app->add_option("--seed", seed)->capture_default_str();
        app->add_option("--algorithms", algorithms, "algorithms to search")->capture_default_str();
        app->add_option("--n-trials", n_trials, "trials per algorithm, the default trial included")
            ->capture_default_str();
        app->add_flag("--search-on-test", search_on_test, "search directly on the test split");
        app->add_option("--validation-ratio", validation_ratio, "share of train held out for the search")
            ->capture_default_str();
        app->add_option("--space-max-depth", space_depth)->capture_default_str();
        app->add_option("--space-min-samples-leaf", space_leaf)->capture_default_str();
        app->add_option("--space-min-samples-split", space_split)->capture_default_str();
        app->add_option("--space-max-features", space_features)->capture_default_str();
        app->add_option("--space-n-estimators", space_estimators)->capture_default_str();
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c;
        if (!(split_ratio > 0.0 && split_ratio < 1.0)) fail(ErrorCode::InvalidArgument, "split-ratio must be in (0,1)");
        if (!(validation_ratio > 0.0 && validation_ratio < 1.0)) {
            fail(ErrorCode::InvalidArgument, "validation-ratio must be in (0,1)");
        }
        c.split_ratio = split_ratio;
        c.seed = seed;
        c.n_trials = n_trials;
        c.search_on_test = search_on_test;
        c.validation_ratio = validation_ratio;
        c.algorithms.clear();
        for (const auto& a : algorithms) {
            const auto algo = parse_algorithm(a);
            if (!algo) fail(ErrorCode::InvalidArgument, "unknown algorithm '" + a + "'");
            c.algorithms.push_back(*algo);
        }
        c.space.max_depth = parse_range(space_depth, "space-max-depth");
        c.space.min_samples_leaf = parse_range(space_leaf, "space-min-samples-leaf");
        c.space.min_samples_split = parse_range(space_split, "space-min-samples-split");
        c.space.max_features = parse_range(space_features, "space-max-features");
        c.space.n_estimators = parse_range(space_estimators, "space-n-estimators");
        c.space.validate();
        return c;
    }
};

Model load_model(const std::string& path) { return deserialize(read_file(path)); }

std::string experiment_text(const ExperimentResult& r) {
    std::string out;
    for (const auto& run : r.runs) {
        if (run.error) out += std::string(to_string(run.algorithm)) + ": stopped: " + *run.error + "\n";
    }
    return out;
}

int any_partial(const ExperimentResult& r) {
    for (const auto& run : r.runs) {
        if (run.error) return kExitData;
    }
    return 0;
}

std::string markdown_summary(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::string row = "|";
        std::size_t cols = 0;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            row += " " + cell + " |";
            ++cols;
        }
        out += row + "\n";
        if (header) {
            out += "|";
            for (std::size_t i = 0; i < cols; ++i) out += "---|";
            out += "\n";
            header = false;
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"greenflow: energy-aware tree-based flow classification"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic capture and label file");
    SyntheticConfig sc;
    std::string synth_out = ".";
    synth->add_option("--sessions", sc.sessions)->capture_default_str();
    synth->add_option("--seed", sc.seed)->capture_default_str();
    synth->add_option("--devices", sc.devices)->capture_default_str();
    synth->add_option("--benign", sc.benign)->capture_default_str();
    synth->add_option("--port-scan", sc.port_scan)->capture_default_str();
    synth->add_option("--command-and-control", sc.command_and_control)->capture_default_str();
    synth->add_option("--dos", sc.dos)->capture_default_str();
    synth->add_option("--unlabeled", sc.unlabeled, "flows with no label record")->capture_default_str();
    synth->add_option("--conflicting", sc.conflicting, "flows with two disagreeing label records")
        ->capture_default_str();
    synth->add_option("-o,--out-dir", synth_out, "writes capture.pcap and capture.labels")->capture_default_str();

    // build
    auto* build = app.add_subcommand("build", "Captures and label files to a dataset CSV");
    std::vector<std::string> captures, label_files;
    std::string attack_map, build_out, build_report;
    BuildOptions bo;
    build->add_option("--capture", captures, "pcap files")->required();
    build->add_option("--labels", label_files, "label files");
    build->add_option("--attack-map", attack_map, "family to attack type map (default: built-in)");
    build->add_option("--idle-timeout-ms", bo.flow.idle_timeout_ms)->capture_default_str();
    build->add_option("--active-timeout-ms", bo.flow.active_timeout_ms)->capture_default_str();
    build->add_flag("--close-on-fin-rst", bo.flow.close_on_fin_rst);
    build->add_option("--label-tolerance-ms", bo.label_tolerance_ms)->capture_default_str();
    build->add_option("-o,--out", build_out, "dataset CSV")->required();
    build->add_option("--report", build_report, "JSON drop report (default: stdout)");

    // split
    auto* split_cmd = app.add_subcommand("split", "Seeded train/test split of a dataset");
    std::string split_in, split_train, split_test;
    double split_ratio = 0.8;
    std::uint64_t split_seed = 42;
    split_cmd->add_option("--dataset", split_in)->required();
    split_cmd->add_option("--ratio", split_ratio)->capture_default_str();
    split_cmd->add_option("--seed", split_seed)->capture_default_str();
    split_cmd->add_option("--train", split_train, "train CSV")->required();
    split_cmd->add_option("--test", split_test, "test CSV")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one model with explicit hyperparameters");
    std::string train_in, train_out;
    std::uint64_t train_seed = 42;
    HpFlags hp_flags;
    train_cmd->add_option("--dataset", train_in)->required();
    train_cmd->add_option("--seed", train_seed)->capture_default_str();
    hp_flags.add(train_cmd);
    train_cmd->add_option("-o,--out", train_out, "model JSON")->required();

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Random search, the four variants and their test reports");
    optimize->alias("experiment");
    std::string opt_in, opt_out;
    RunFlags run_flags;
    MeterFlags opt_meter;
    optimize->add_option("--dataset", opt_in)->required();
    run_flags.add(optimize);
    opt_meter.add(optimize);
    optimize->add_option("-o,--out-dir", opt_out)->required();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a model on a dataset");
    std::string eval_model, eval_in, eval_out, eval_variant = "default";
    std::uint64_t eval_seed = 42;
    MeterFlags eval_meter;
    evaluate_cmd->add_option("--model", eval_model)->required();
    evaluate_cmd->add_option("--dataset", eval_in)->required();
    evaluate_cmd->add_option("--variant", eval_variant, "label stored in the report")->capture_default_str();
    evaluate_cmd->add_option("--seed", eval_seed, "seed recorded in the report")->capture_default_str();
    eval_meter.add(evaluate_cmd);
    evaluate_cmd->add_option("-o,--out", eval_out, "report JSON (default: stdout)");

    // errors
    auto* errors_cmd = app.add_subcommand("errors", "False-negative breakdown of a model on a dataset");
    std::string err_model, err_in, err_out;
    errors_cmd->add_option("--model", err_model)->required();
    errors_cmd->add_option("--dataset", err_in)->required();
    errors_cmd->add_option("-o,--out", err_out, "JSON (default: stdout)");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Drop rows matching a predicate and compare models");
    std::string abl_in, abl_drop = "attack_type=port-scan", abl_out, abl_study, abl_from;
    double abl_ratio = 0.8;
    std::uint64_t abl_seed = 42;
    bool abl_reopt = false;
    RunFlags abl_run;
    MeterFlags abl_meter;
    ablate_cmd->add_option("--dataset", abl_in)->required();
    ablate_cmd->add_option("--drop", abl_drop, "attack_type=<type> or family=<name>")->capture_default_str();
    ablate_cmd->add_option("-o,--out", abl_out, "reduced dataset CSV");
    ablate_cmd->add_option("--study", abl_study, "directory for the before/after comparison");
    ablate_cmd->add_option("--from-experiment", abl_from,
                           "algorithm directory of an optimize run; its variant hyperparameters are retrained");
    ablate_cmd->add_flag("--reoptimize", abl_reopt, "also run a fresh search on the reduced dataset");
    ablate_cmd->add_option("--algorithms", abl_run.algorithms, "algorithms searched with --reoptimize")
        ->capture_default_str();
    ablate_cmd->add_option("--n-trials", abl_run.n_trials, "trials per algorithm with --reoptimize")
        ->capture_default_str();
    ablate_cmd->add_flag("--search-on-test", abl_run.search_on_test, "search on the test split with --reoptimize");
    ablate_cmd->add_option("--ratio", abl_ratio)->capture_default_str();
    ablate_cmd->add_option("--seed", abl_seed)->capture_default_str();
    abl_meter.add(ablate_cmd);

    // report
    auto* report = app.add_subcommand("report", "Print the summary table of an optimize run");
    std::string rep_dir, rep_format = "markdown";
    report->add_option("--experiment", rep_dir)->required();
    report->add_option("--format", rep_format, "markdown or csv")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (synth->parsed()) {
            const auto traffic = generate_traffic(sc);
            fs::create_directories(synth_out);
            std::ofstream cap(fs::path(synth_out) / "capture.pcap", std::ios::binary);
            write_capture(cap, traffic.packets);
            std::ofstream lab(fs::path(synth_out) / "capture.labels");
            write_label_file(lab, traffic.labels);
            std::cerr << traffic.packets.size() << " packets, " << traffic.labels.size() << " label records\n";
            return 0;
        }
        if (build->parsed()) {
            if (!attack_map.empty()) {
                std::ifstream in(attack_map);
                if (!in) fail(ErrorCode::Io, "cannot open " + attack_map);
                bo.attack_map = AttackTypeMap::parse(in);
            }
            std::vector<fs::path> caps(captures.begin(), captures.end()), labs(label_files.begin(), label_files.end());
            const auto r = build_dataset(caps, labs, bo);
            save_dataset(build_out, r.samples, provenance(r));
            emit(build_report, build_report_json(r).dump(2) + "\n");
            bool any_ok = false;
            for (const auto& c : r.captures) {
                if (c.error) std::cerr << c.name << ": " << *c.error << "\n";
                any_ok = any_ok || !c.error;
            }
            for (const auto& e : r.label_errors) std::cerr << e << "\n";
            return any_ok ? 0 : kExitData;
        }
        if (split_cmd->parsed()) {
            const auto d = load_dataset(split_in);
            const auto s = split(d.samples, split_ratio, split_seed);
            DatasetInfo info;
            info.notes.push_back("split ratio=" + std::to_string(split_ratio) + " seed=" + std::to_string(split_seed));
            save_dataset(split_train, s.train, info);
            save_dataset(split_test, s.test, info);
            std::cerr << s.train.size() << " train, " << s.test.size() << " test\n";
            return 0;
        }
        if (train_cmd->parsed()) {
            const Hyperparams hp = hp_flags.resolve();
            const auto d = load_dataset(train_in);
            const Model m = train(TrainingData::from_samples(d.samples), hp, train_seed);
            write_file(train_out, serialize(m) + "\n");
            return 0;
        }
        if (optimize->parsed()) {
            const ExperimentConfig cfg = run_flags.resolve();
            const Meter meter = opt_meter.resolve();
            const auto d = load_dataset(opt_in);
            const auto res = run_experiment(d.samples, cfg, meter);
            write_experiment(opt_out, res);
            std::cerr << experiment_text(res);
            std::cout << summary_csv(res);
            return any_partial(res);
        }
        if (evaluate_cmd->parsed()) {
            const auto v = std::find_if(std::begin(kAllVariants), std::end(kAllVariants),
                                        [&](Variant x) { return to_string(x) == eval_variant; });
            if (v == std::end(kAllVariants)) fail(ErrorCode::InvalidArgument, "unknown variant '" + eval_variant + "'");
            const Meter meter = eval_meter.resolve();
            auto model = std::make_shared<const Model>(load_model(eval_model));
            const auto d = load_dataset(eval_in);
            const auto r = score(*v, 0, model, TrainingData::from_samples(d.samples), meter);
            emit(eval_out, report_json(r, eval_seed).dump(2) + "\n");
            return 0;
        }
        if (errors_cmd->parsed()) {
            const Model m = load_model(err_model);
            const auto d = load_dataset(err_in);
            emit(err_out, to_json(error_analysis(m, d.samples)).dump(2) + "\n");
            return 0;
        }
        if (ablate_cmd->parsed()) {
            const auto drop = parse_predicate(abl_drop);
            const auto d = load_dataset(abl_in);
            const auto reduced = ablate(d.samples, drop);
            std::cerr << "rows " << d.samples.size() << " -> " << reduced.size() << " (dropped " << abl_drop << ")\n";
            if (!abl_out.empty()) {
                DatasetInfo info;
                info.notes.push_back("ablated " + abl_drop);
                save_dataset(abl_out, reduced, info);
            }
            if (abl_study.empty()) return 0;
            const Meter meter = abl_meter.resolve();
            std::vector<std::pair<Variant, Hyperparams>> configs;
            if (abl_from.empty()) {
                configs.emplace_back(Variant::Default, Hyperparams::defaults(Algorithm::SingleTree));
            } else {
                for (const Variant v : kAllVariants) {
                    const fs::path p = fs::path(abl_from) / "models" / (std::string(to_string(v)) + ".json");
                    if (fs::exists(p)) configs.emplace_back(v, load_model(p.string()).hp);
                }
                if (configs.empty()) fail(ErrorCode::Io, "no variant models under " + abl_from + "/models");
            }
            const auto r = ablation_study(d.samples, drop, configs, abl_ratio, abl_seed, meter);
            const fs::path dir = abl_study;
            std::string summary = "stage," + summary_header() + "\n";
            for (const auto& [stage, results] : {std::pair{"before", &r.before}, std::pair{"after", &r.after}}) {
                for (const auto& v : *results) {
                    write_file(dir / stage / (std::string(to_string(v.variant)) + ".json"),
                               report_json(v, abl_seed).dump(2) + "\n");
                    summary += std::string(stage) + "," + summary_row(v) + "\n";
                }
            }
            write_file(dir / "summary.csv", summary);
            write_file(dir / "rows.txt", "before " + std::to_string(r.rows_before) + "\nafter " +
                                             std::to_string(r.rows_after) + "\ndrop " + abl_drop + "\n");
            std::cout << summary;
            if (abl_reopt) {
                ExperimentConfig cfg = abl_run.resolve();
                cfg.split_ratio = abl_ratio;
                cfg.seed = abl_seed;
                const auto res = run_experiment(reduced, cfg, meter);
                write_experiment(dir / "reoptimized", res);
                return any_partial(res);
            }
            return 0;
        }
        if (report->parsed()) {
            const std::string csv = read_file(fs::path(rep_dir) / "summary.csv");
            if (rep_format == "csv") {
                std::cout << csv;
            } else if (rep_format == "markdown") {
                std::cout << markdown_summary(csv);
            } else {
                fail(ErrorCode::InvalidArgument, "unknown format '" + rep_format + "'");
            }
            for (const auto& e : fs::directory_iterator(rep_dir)) {
                if (fs::exists(e.path() / "PARTIAL")) {
                    std::cerr << e.path().filename().string() << ": partial results\n";
                }
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
