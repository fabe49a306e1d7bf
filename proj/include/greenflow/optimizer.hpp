#pragma once

// Hyperparameter search over (µWh per sample, MCC), its Pareto front and the
// four reported variants: default, max-green, max-MCC, balanced.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "greenflow/energy.hpp"
#include "greenflow/error.hpp"
#include "greenflow/features.hpp"
#include "greenflow/forest.hpp"
#include "greenflow/metrics.hpp"
#include "greenflow/random.hpp"

namespace greenflow {

// ---------------------------------------------------------------------------
// Evaluation of one model on one dataset

struct Evaluation {
    ConfusionMatrix cm;
    EnergyReport energy;
    std::vector<std::uint8_t> predictions;
};

inline Evaluation evaluate(const Model& model, const TrainingData& data, const Meter& meter) {
    if (data.rows() == 0) {
        fail(ErrorCode::EmptyDataset, "evaluate: empty dataset");
    }
    Evaluation ev;
    ev.predictions.assign(data.rows(), 0);
    const Workload work = [&] {
        WorkloadResult r;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const Prediction p = model.predict(data.row(i));
            ev.predictions[i] = p.cls;
            r.node_visits += p.node_visits;
            ++r.samples;
        }
        return r;
    };
    ev.energy = meter.measure(work);
    ev.cm = confusion(ev.predictions, data.labels);
    return ev;
}

// ---------------------------------------------------------------------------
// Trials and the front

enum class TrialStatus { Ok, Failed };

struct Trial {
    std::size_t index = 0;
    Hyperparams hp;
    double mcc = 0.0;
    double uwh_per_sample = 0.0;
    TrialStatus status = TrialStatus::Ok;
    std::string error;
    bool low_confidence = false;
    std::shared_ptr<const Model> model;

    bool ok() const { return status == TrialStatus::Ok; }
};

/// Convenience for fixtures and tests: a completed trial at (uwh, mcc).
inline Trial make_point(std::size_t index, double uwh, double mcc) {
    Trial t;
    t.index = index;
    t.uwh_per_sample = uwh;
    t.mcc = mcc;
    return t;
}

/// a dominates b: no worse on both axes, strictly better on one.
inline bool dominates(const Trial& a, const Trial& b) {
    return a.uwh_per_sample <= b.uwh_per_sample && a.mcc >= b.mcc &&
           (a.uwh_per_sample < b.uwh_per_sample || a.mcc > b.mcc);
}

/// Positions (into `trials`) of the non-dominated completed trials, ordered
/// by ascending uwh then position. O(n log n).
inline std::vector<std::size_t> pareto_front(std::span<const Trial> trials) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].ok()) {
            order.push_back(i);
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = trials[a];
        const auto& y = trials[b];
        if (x.uwh_per_sample != y.uwh_per_sample) return x.uwh_per_sample < y.uwh_per_sample;
        if (x.mcc != y.mcc) return x.mcc > y.mcc;
        return a < b;
    });
    std::vector<std::size_t> front;
    double best_below = -std::numeric_limits<double>::infinity(); // best mcc at strictly lower uwh
    for (std::size_t g = 0; g < order.size();) {
        const double uwh = trials[order[g]].uwh_per_sample;
        const double top = trials[order[g]].mcc;
        std::size_t end = g;
        while (end < order.size() && trials[order[end]].uwh_per_sample == uwh) {
            ++end;
        }
        if (top > best_below) {
            for (std::size_t k = g; k < end && trials[order[k]].mcc == top; ++k) {
                front.push_back(order[k]);
            }
            best_below = top;
        }
        g = end;
    }
    return front;
}

enum class Variant { Default, MaxGreen, MaxMcc, Balanced };

inline constexpr Variant kAllVariants[] = {Variant::Default, Variant::MaxGreen, Variant::MaxMcc, Variant::Balanced};

constexpr std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::Default: return "default";
    case Variant::MaxGreen: return "max-green";
    case Variant::MaxMcc: return "max-MCC";
    case Variant::Balanced: return "balanced";
    }
    return "default";
}

/// Distances this close count as equal so rounding cannot break an exact tie.
inline constexpr double kDistanceTieTolerance = 1e-12;

/// Front member closest to (0, 1). The consumption axis is min-max scaled
/// over all completed trials; the MCC axis is min-max scaled over the front.
/// Ties go to lower uwh, then lower trial index. Returns a position.
inline std::size_t select_balanced(std::span<const Trial> trials) {
    const auto front = pareto_front(trials);
    if (front.empty()) {
        fail(ErrorCode::InvalidArgument, "select_balanced: no completed trials");
    }
    double cmin = std::numeric_limits<double>::infinity();
    double cmax = -cmin;
    for (const auto& t : trials) {
        if (t.ok()) {
            cmin = std::min(cmin, t.uwh_per_sample);
            cmax = std::max(cmax, t.uwh_per_sample);
        }
    }
    double fmin = std::numeric_limits<double>::infinity();
    double fmax = -fmin;
    for (auto i : front) {
        fmin = std::min(fmin, trials[i].mcc);
        fmax = std::max(fmax, trials[i].mcc);
    }
    std::size_t best = front.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (auto i : front) {
        const auto& t = trials[i];
        const double x = cmax > cmin ? (t.uwh_per_sample - cmin) / (cmax - cmin) : 0.0;
        const double y = fmax > fmin ? (t.mcc - fmin) / (fmax - fmin) : 1.0;
        const double d = std::hypot(x, 1.0 - y);
        const auto& b = trials[best];
        const bool tie = std::abs(d - best_d) <= kDistanceTieTolerance;
        if ((!tie && d < best_d) || (tie && (t.uwh_per_sample < b.uwh_per_sample ||
                                             (t.uwh_per_sample == b.uwh_per_sample && t.index < b.index)))) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

/// Returns a position into `trials`.
inline std::size_t select_variant(std::span<const Trial> trials, Variant mode, const Hyperparams& default_hp) {
    std::optional<std::size_t> best;
    auto better = [&](std::size_t i) {
        if (!best) return true;
        const auto& t = trials[i];
        const auto& b = trials[*best];
        if (mode == Variant::MaxGreen) {
            if (t.uwh_per_sample != b.uwh_per_sample) return t.uwh_per_sample < b.uwh_per_sample;
            if (t.mcc != b.mcc) return t.mcc > b.mcc;
        } else {
            if (t.mcc != b.mcc) return t.mcc > b.mcc;
            if (t.uwh_per_sample != b.uwh_per_sample) return t.uwh_per_sample < b.uwh_per_sample;
        }
        return t.index < b.index;
    };
    switch (mode) {
    case Variant::Default:
        for (std::size_t i = 0; i < trials.size(); ++i) {
            if (trials[i].ok() && trials[i].hp == default_hp && (!best || trials[i].index < trials[*best].index)) {
                best = i;
            }
        }
        if (!best) {
            fail(ErrorCode::MissingDefaultTrial, "no completed trial uses the default hyperparameters");
        }
        return *best;
    case Variant::MaxGreen:
    case Variant::MaxMcc:
        for (std::size_t i = 0; i < trials.size(); ++i) {
            if (trials[i].ok() && better(i)) {
                best = i;
            }
        }
        if (!best) {
            fail(ErrorCode::InvalidArgument, "select_variant: no completed trials");
        }
        return *best;
    case Variant::Balanced:
        return select_balanced(trials);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Search

struct IntRange {
    int lo = 0;
    int hi = 0;
};

/// Every range is inclusive. max_depth is always bounded here.
struct SearchSpace {
    IntRange max_depth{1, 200};
    IntRange min_samples_leaf{1, 10};
    IntRange min_samples_split{2, 30};
    IntRange max_features{1, 59};
    IntRange n_estimators{10, 256};

    void validate() const {
        for (const auto* r : {&max_depth, &min_samples_leaf, &min_samples_split, &max_features, &n_estimators}) {
            if (r->lo > r->hi) {
                fail(ErrorCode::InvalidArgument, "search space range is empty");
            }
        }
        if (max_depth.lo < 1 || min_samples_leaf.lo < 1 || min_samples_split.lo < 2 || max_features.lo < 1 ||
            max_features.hi > static_cast<int>(kFeatureCount) || n_estimators.lo < 1) {
            fail(ErrorCode::InvalidArgument, "search space range outside hyperparameter bounds");
        }
    }

    Hyperparams sample(Algorithm algorithm, Rng& rng) const {
        auto draw = [&](IntRange r) { return static_cast<int>(rng.between(r.lo, r.hi)); };
        Hyperparams hp;
        hp.algorithm = algorithm;
        hp.max_depth = draw(max_depth);
        hp.min_samples_leaf = draw(min_samples_leaf);
        hp.min_samples_split = draw(min_samples_split);
        hp.max_features = MaxFeatures::of(draw(max_features));
        const int est = draw(n_estimators);
        hp.n_estimators = algorithm == Algorithm::SingleTree ? Hyperparams{}.n_estimators : est;
        return hp;
    }
};

struct SearchOptions {
    std::size_t n_trials = 64;
    std::uint64_t seed = 0;
    /// Trial 0 uses the library defaults so the default variant always exists.
    bool include_default = true;
};

/// Runs trials sequentially. Trial i's hyperparameters and training seed come
/// from streams derived from (seed, i), so the list is independent of timing.
inline std::vector<Trial> run_search(const TrainingData& train_set, const TrainingData& holdout, Algorithm algorithm,
                                     const SearchSpace& space, const SearchOptions& opts, const Meter& meter) {
    space.validate();
    std::vector<Trial> trials;
    trials.reserve(opts.n_trials);
    const std::uint64_t hp_seed = derive_seed(opts.seed, "search-hyperparams");
    const std::uint64_t train_seed = derive_seed(opts.seed, "search-train");
    for (std::size_t i = 0; i < opts.n_trials; ++i) {
        Trial t;
        t.index = i;
        if (i == 0 && opts.include_default) {
            t.hp = Hyperparams::defaults(algorithm);
        } else {
            Rng rng(derive_seed(hp_seed, i));
            t.hp = space.sample(algorithm, rng);
        }
        try {
            auto model = std::make_shared<Model>(train(train_set, t.hp, derive_seed(train_seed, i)));
            const Evaluation ev = evaluate(*model, holdout, meter);
            t.mcc = mcc(ev.cm);
            t.uwh_per_sample = ev.energy.uwh_per_sample;
            t.low_confidence = ev.energy.low_confidence;
            t.model = std::move(model);
        } catch (const Error& e) {
            t.status = TrialStatus::Failed;
            t.error = e.what();
        }
        trials.push_back(std::move(t));
    }
    return trials;
}

// ---------------------------------------------------------------------------
// Export

inline std::string trials_csv_header() {
    return "index,algorithm,max_depth,min_samples_leaf,min_samples_split,max_features,n_estimators,mcc,"
           "uwh_per_sample,status";
}

inline void write_trials_csv(std::ostream& out, std::span<const Trial> trials) {
    out << trials_csv_header() << '\n';
    for (const auto& t : trials) {
        out << t.index << ',' << to_string(t.hp.algorithm) << ','
            << (t.hp.max_depth ? std::to_string(*t.hp.max_depth) : std::string("none")) << ','
            << t.hp.min_samples_leaf << ',' << t.hp.min_samples_split << ',' << t.hp.max_features.to_string() << ','
            << t.hp.n_estimators << ',' << csv::format_real(t.mcc) << ',' << csv::format_real(t.uwh_per_sample)
            << ',' << (t.ok() ? "ok" : "failed") << '\n';
    }
}

inline nlohmann::json front_to_json(std::span<const Trial> trials) {
    auto out = nlohmann::json::array();
    for (auto i : pareto_front(trials)) {
        const auto& t = trials[i];
        out.push_back({{"index", t.index},
                       {"uwh_per_sample", t.uwh_per_sample},
                       {"mcc", t.mcc},
                       {"hyperparams", hyperparams_to_json(t.hp)}});
    }
    return out;
}

/// Whitespace-separated "uwh mcc marker" lines, one per completed trial.
/// Markers: front, default, max-green, max-MCC, balanced (comma-joined), or "-".
inline void write_plot_data(std::ostream& out, std::span<const Trial> trials, const Hyperparams& default_hp) {
    std::vector<std::string> marks(trials.size());
    for (auto i : pareto_front(trials)) {
        marks[i] = "front";
    }
    for (auto v : kAllVariants) {
        try {
            const auto i = select_variant(trials, v, default_hp);
            marks[i] += marks[i].empty() ? "" : ",";
            marks[i] += to_string(v);
        } catch (const Error&) {
            // a missing variant simply gets no marker
        }
    }
    out << "# uwh_per_sample mcc marker\n";
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].ok()) {
            out << csv::format_real(trials[i].uwh_per_sample) << ' ' << csv::format_real(trials[i].mcc) << ' '
                << (marks[i].empty() ? "-" : marks[i]) << '\n';
        }
    }
}

} // namespace greenflow
