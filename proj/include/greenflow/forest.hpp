#pragma once

// Binary tree classifiers: CART single tree, random forest, extra-trees.
//
// Prediction counts the internal-node comparisons it performs; that count is
// what the proxy energy meter charges for.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "greenflow/error.hpp"
#include "greenflow/features.hpp"
#include "greenflow/random.hpp"

namespace greenflow {

enum class Algorithm { SingleTree, RandomForest, ExtraTrees };

constexpr std::string_view to_string(Algorithm a) {
    switch (a) {
    case Algorithm::SingleTree: return "single-tree";
    case Algorithm::RandomForest: return "random-forest";
    case Algorithm::ExtraTrees: return "extra-trees";
    }
    return "single-tree";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
    for (auto a : {Algorithm::SingleTree, Algorithm::RandomForest, Algorithm::ExtraTrees}) {
        if (s == to_string(a)) {
            return a;
        }
    }
    return std::nullopt;
}

/// Candidate features examined per split.
struct MaxFeatures {
    enum class Kind { Count, Sqrt, All };
    Kind kind = Kind::All;
    int count = 0;

    static MaxFeatures all() { return {}; }
    static MaxFeatures sqrt() { return {Kind::Sqrt, 0}; }
    static MaxFeatures of(int n) { return {Kind::Count, n}; }

    /// Number of candidates for `n_features` columns (at least 1, at most n_features).
    std::size_t resolve(std::size_t n_features) const {
        std::size_t k = n_features;
        if (kind == Kind::Sqrt) {
            k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features))));
        } else if (kind == Kind::Count) {
            k = static_cast<std::size_t>(count);
        }
        return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1));
    }

    std::string to_string() const {
        switch (kind) {
        case Kind::All: return "all";
        case Kind::Sqrt: return "sqrt";
        case Kind::Count: return std::to_string(count);
        }
        return "all";
    }

    static std::optional<MaxFeatures> parse(std::string_view s) {
        if (s == "all") {
            return all();
        }
        if (s == "sqrt") {
            return sqrt();
        }
        int n = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) {
            return std::nullopt;
        }
        return of(n);
    }

    bool operator==(const MaxFeatures&) const = default;
};

struct Hyperparams {
    Algorithm algorithm = Algorithm::SingleTree;
    std::optional<int> max_depth; // nullopt: unbounded
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    MaxFeatures max_features;
    int n_estimators = 100; // ignored for single-tree

    /// Library defaults: single tree ∞/1/2/all; ensembles ∞/1/2/sqrt/100.
    static Hyperparams defaults(Algorithm a) {
        Hyperparams hp;
        hp.algorithm = a;
        if (a != Algorithm::SingleTree) {
            hp.max_features = MaxFeatures::sqrt();
        }
        return hp;
    }

    std::size_t tree_count() const { return algorithm == Algorithm::SingleTree ? 1 : static_cast<std::size_t>(n_estimators); }

    void validate() const {
        auto bad = [](const std::string& what) { fail(ErrorCode::InvalidArgument, "hyperparameter " + what); };
        if (max_depth && *max_depth < 1) bad("max_depth must be >= 1");
        if (min_samples_leaf < 1) bad("min_samples_leaf must be >= 1");
        if (min_samples_split < 2) bad("min_samples_split must be >= 2");
        if (n_estimators < 1) bad("n_estimators must be >= 1");
        if (max_features.kind == MaxFeatures::Kind::Count &&
            (max_features.count < 1 || max_features.count > static_cast<int>(kFeatureCount))) {
            bad("max_features must be in [1, 59]");
        }
    }

    bool operator==(const Hyperparams&) const = default;
};

/// Row-major feature matrix with 0/1 labels.
struct TrainingData {
    std::size_t n_features = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> labels;

    explicit TrainingData(std::size_t features = kFeatureCount) : n_features(features) {}

    std::size_t rows() const { return labels.size(); }

    std::span<const double> row(std::size_t i) const { return {values.data() + i * n_features, n_features}; }

    void add(std::span<const double> x, std::uint8_t y) {
        if (x.size() != n_features) {
            fail(ErrorCode::LengthMismatch, "row has " + std::to_string(x.size()) + " features, expected " +
                                                std::to_string(n_features));
        }
        values.insert(values.end(), x.begin(), x.end());
        labels.push_back(y);
    }

    static TrainingData from_samples(std::span<const LabeledSample> samples) {
        TrainingData d(kFeatureCount);
        d.values.reserve(samples.size() * kFeatureCount);
        d.labels.reserve(samples.size());
        for (const auto& s : samples) {
            d.add(s.features, s.cls);
        }
        return d;
    }
};

/// Gini impurity 1 - Σ p². Throws EmptyNode for (0, 0).
inline double gini(std::uint64_t c0, std::uint64_t c1) {
    if (c0 == 0 && c1 == 0) {
        fail(ErrorCode::EmptyNode, "gini of an empty node");
    }
    const double n = static_cast<double>(c0) + static_cast<double>(c1);
    const double p0 = static_cast<double>(c0) / n;
    const double p1 = static_cast<double>(c1) / n;
    return 1.0 - (p0 * p0 + p1 * p1);
}

struct TreeNode {
    std::int32_t feature = -1; // -1 for leaves
    double threshold = 0.0;    // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t cls = 0;
    std::uint32_t count0 = 0; // training samples reaching this node, by class
    std::uint32_t count1 = 0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// Nodes in preorder; index 0 is the root.
struct TreeModel {
    std::vector<TreeNode> nodes;
    int depth = 0;

    std::uint8_t predict(std::span<const double> x, std::uint64_t& visits) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            ++visits;
            const TreeNode& n = nodes[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes[i].cls;
    }

    bool operator==(const TreeModel&) const = default;
};

struct Prediction {
    std::uint8_t cls = 0;
    std::uint64_t node_visits = 0;
};

/// A trained classifier. A single tree is a model with one tree.
struct Model {
    Hyperparams hp;
    std::size_t n_features = kFeatureCount;
    std::vector<TreeModel> trees;

    /// Majority vote across trees; ties go to class 0.
    Prediction predict(std::span<const double> x) const {
        if (x.size() != n_features) {
            fail(ErrorCode::LengthMismatch, "predict: expected " + std::to_string(n_features) + " features, got " +
                                                std::to_string(x.size()));
        }
        Prediction p;
        std::size_t votes = 0;
        for (const auto& t : trees) {
            votes += t.predict(x, p.node_visits);
        }
        p.cls = 2 * votes > trees.size() ? 1 : 0;
        return p;
    }

    std::size_t node_count() const {
        std::size_t n = 0;
        for (const auto& t : trees) {
            n += t.nodes.size();
        }
        return n;
    }

    bool operator==(const Model&) const = default;
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& columns, const std::vector<std::uint8_t>& labels,
                const Hyperparams& hp, std::size_t max_features, std::uint64_t seed)
        : columns_(columns), labels_(labels), hp_(hp), max_features_(max_features), rng_(seed),
          features_(columns.size()) {}

    TreeModel build(std::vector<std::size_t> idx) {
        idx_ = std::move(idx);
        TreeModel tree;
        struct Task {
            std::size_t begin, end;
            int depth;
            std::int32_t parent;
            bool left;
        };
        std::vector<Task> stack{{0, idx_.size(), 0, -1, false}};
        while (!stack.empty()) {
            const Task t = stack.back();
            stack.pop_back();
            const auto id = static_cast<std::int32_t>(tree.nodes.size());
            if (t.parent >= 0) {
                (t.left ? tree.nodes[t.parent].left : tree.nodes[t.parent].right) = id;
            }
            TreeNode node;
            for (std::size_t i = t.begin; i < t.end; ++i) {
                (labels_[idx_[i]] ? node.count1 : node.count0) += 1;
            }
            node.cls = node.count1 > node.count0 ? 1 : 0;
            tree.depth = std::max(tree.depth, t.depth);

            const std::size_t n = t.end - t.begin;
            const bool pure = node.count0 == 0 || node.count1 == 0;
            const bool depth_hit = hp_.max_depth && t.depth >= *hp_.max_depth;
            if (!pure && !depth_hit && n >= static_cast<std::size_t>(hp_.min_samples_split)) {
                if (const auto split = find_split(t.begin, t.end, node.count0, node.count1)) {
                    node.feature = static_cast<std::int32_t>(split->feature);
                    node.threshold = split->threshold;
                    const auto& col = columns_[split->feature];
                    const double thr = split->threshold;
                    const auto mid = std::stable_partition(idx_.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                                           idx_.begin() + static_cast<std::ptrdiff_t>(t.end),
                                                           [&](std::size_t i) { return col[i] <= thr; });
                    const auto m = static_cast<std::size_t>(mid - idx_.begin());
                    // Right pushed first so the left subtree is numbered next (preorder).
                    stack.push_back({m, t.end, t.depth + 1, id, false});
                    stack.push_back({t.begin, m, t.depth + 1, id, true});
                }
            }
            tree.nodes.push_back(node);
        }
        return tree;
    }

private:
    struct Split {
        std::size_t feature;
        double threshold;
        double score; // Σ_children (c0² + c1²) / n; larger means lower weighted Gini
    };

    static double child_score(double c0, double c1) { return (c0 * c0 + c1 * c1) / (c0 + c1); }

    std::optional<Split> find_split(std::size_t begin, std::size_t end, std::uint32_t total0, std::uint32_t total1) {
        const std::size_t d = columns_.size();
        const auto min_leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        const bool shuffled = hp_.algorithm != Algorithm::SingleTree || max_features_ < d;
        std::optional<Split> best;
        std::size_t visited = 0;
        for (std::size_t k = 0; k < d && visited < max_features_; ++k) {
            if (shuffled) {
                std::swap(features_[k], features_[k + rng_.index(d - k)]);
            }
            const std::size_t f = features_[k];
            const auto& col = columns_[f];
            std::optional<Split> cand;
            if (hp_.algorithm == Algorithm::ExtraTrees) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (std::size_t i = begin; i < end; ++i) {
                    lo = std::min(lo, col[idx_[i]]);
                    hi = std::max(hi, col[idx_[i]]);
                }
                if (!(lo < hi)) {
                    continue; // constant here; not counted as visited
                }
                ++visited;
                double thr = lo + rng_.open_unit() * (hi - lo);
                if (!(thr < hi)) {
                    thr = lo;
                }
                std::uint32_t l0 = 0, l1 = 0;
                for (std::size_t i = begin; i < end; ++i) {
                    if (col[idx_[i]] <= thr) {
                        (labels_[idx_[i]] ? l1 : l0) += 1;
                    }
                }
                const std::size_t nl = l0 + l1;
                const std::size_t nr = (end - begin) - nl;
                if (nl >= min_leaf && nr >= min_leaf) {
                    cand = Split{f, thr, child_score(l0, l1) + child_score(total0 - l0, total1 - l1)};
                }
            } else {
                scratch_.clear();
                for (std::size_t i = begin; i < end; ++i) {
                    scratch_.emplace_back(col[idx_[i]], labels_[idx_[i]]);
                }
                std::sort(scratch_.begin(), scratch_.end());
                if (!(scratch_.front().first < scratch_.back().first)) {
                    continue;
                }
                ++visited;
                const std::size_t n = scratch_.size();
                std::uint32_t l0 = 0, l1 = 0;
                for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                    (scratch_[pos].second ? l1 : l0) += 1;
                    const double a = scratch_[pos].first;
                    const double b = scratch_[pos + 1].first;
                    if (!(a < b)) {
                        continue;
                    }
                    const std::size_t nl = pos + 1;
                    if (nl < min_leaf) {
                        continue;
                    }
                    if (n - nl < min_leaf) {
                        break;
                    }
                    const double score = child_score(l0, l1) + child_score(total0 - l0, total1 - l1);
                    if (!cand || score > cand->score) {
                        double thr = a / 2.0 + b / 2.0;
                        if (!(thr < b) || !std::isfinite(thr)) {
                            thr = a;
                        }
                        cand = Split{f, thr, score};
                    }
                }
            }
            if (cand && (!best || cand->score > best->score)) {
                best = cand;
            }
        }
        return best;
    }

    const std::vector<std::vector<double>>& columns_;
    const std::vector<std::uint8_t>& labels_;
    const Hyperparams& hp_;
    std::size_t max_features_;
    Rng rng_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> idx_;
    std::vector<std::pair<double, std::uint8_t>> scratch_;
};

} // namespace detail

/// Trains a model. (data, hp, seed) determine the result exactly: tree t
/// draws from its own stream derive_seed(seed, t).
inline Model train(const TrainingData& data, const Hyperparams& hp, std::uint64_t seed) {
    hp.validate();
    if (data.rows() == 0) {
        fail(ErrorCode::EmptyDataset, "cannot train on an empty dataset");
    }
    if (data.n_features == 0) {
        fail(ErrorCode::InvalidArgument, "training data has no features");
    }
    const std::size_t n = data.rows();
    const std::size_t d = data.n_features;
    std::vector<std::vector<double>> columns(d, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < d; ++f) {
            columns[f][i] = data.values[i * d + f];
        }
    }

    Model model;
    model.hp = hp;
    model.n_features = d;
    const std::size_t max_features = hp.max_features.resolve(d);
    for (std::size_t t = 0; t < hp.tree_count(); ++t) {
        const std::uint64_t tree_seed = derive_seed(seed, t);
        std::vector<std::size_t> idx(n);
        if (hp.algorithm == Algorithm::RandomForest) {
            Rng boot(derive_seed(tree_seed, "bootstrap"));
            for (auto& i : idx) {
                i = static_cast<std::size_t>(boot.index(n));
            }
            std::sort(idx.begin(), idx.end());
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        detail::TreeBuilder builder(columns, data.labels, hp, max_features, tree_seed);
        model.trees.push_back(builder.build(std::move(idx)));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Serialization: a self-describing JSON container.
//
// {"format": "greenflow-model", "version": 1, "algorithm": "...",
//  "n_features": 59, "hyperparams": {...},
//  "trees": [{"depth": d, "nodes": [[feature, threshold, left, right, class, count0, count1], ...]}]}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json hyperparams_to_json(const Hyperparams& hp) {
    nlohmann::json j;
    j["algorithm"] = std::string(to_string(hp.algorithm));
    j["max_depth"] = hp.max_depth ? nlohmann::json(*hp.max_depth) : nlohmann::json(nullptr);
    j["min_samples_leaf"] = hp.min_samples_leaf;
    j["min_samples_split"] = hp.min_samples_split;
    if (hp.max_features.kind == MaxFeatures::Kind::Count) {
        j["max_features"] = hp.max_features.count;
    } else {
        j["max_features"] = hp.max_features.to_string();
    }
    j["n_estimators"] = hp.n_estimators;
    return j;
}

inline Hyperparams hyperparams_from_json(const nlohmann::json& j) {
    Hyperparams hp;
    const auto algo = parse_algorithm(j.at("algorithm").get<std::string>());
    if (!algo) {
        fail(ErrorCode::InvalidArgument, "unknown algorithm");
    }
    hp.algorithm = *algo;
    if (!j.at("max_depth").is_null()) {
        hp.max_depth = j.at("max_depth").get<int>();
    }
    hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    hp.min_samples_split = j.at("min_samples_split").get<int>();
    const auto& mf = j.at("max_features");
    if (mf.is_number_integer()) {
        hp.max_features = MaxFeatures::of(mf.get<int>());
    } else {
        const auto parsed = MaxFeatures::parse(mf.get<std::string>());
        if (!parsed) {
            fail(ErrorCode::InvalidArgument, "bad max_features");
        }
        hp.max_features = *parsed;
    }
    hp.n_estimators = j.at("n_estimators").get<int>();
    return hp;
}

inline std::string serialize(const Model& m) {
    nlohmann::json j;
    j["format"] = "greenflow-model";
    j["version"] = kModelFormatVersion;
    j["algorithm"] = std::string(to_string(m.hp.algorithm));
    j["n_features"] = m.n_features;
    j["hyperparams"] = hyperparams_to_json(m.hp);
    auto trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        auto nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.cls, n.count0, n.count1});
        }
        trees.push_back({{"depth", t.depth}, {"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

inline Model deserialize(std::string_view bytes) {
    if (bytes.empty()) {
        fail(ErrorCode::CorruptModel, "empty model");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptModel, e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != "greenflow-model") {
            fail(ErrorCode::CorruptModel, "not a greenflow model");
        }
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            fail(ErrorCode::VersionMismatch, "model version " + std::to_string(version) + ", supported " +
                                                 std::to_string(kModelFormatVersion));
        }
        Model m;
        m.hp = hyperparams_from_json(j.at("hyperparams"));
        m.n_features = j.at("n_features").get<std::size_t>();
        for (const auto& jt : j.at("trees")) {
            TreeModel t;
            t.depth = jt.at("depth").get<int>();
            for (const auto& jn : jt.at("nodes")) {
                if (!jn.is_array() || jn.size() != 7) {
                    fail(ErrorCode::CorruptModel, "node record must have 7 fields");
                }
                TreeNode n;
                n.feature = jn[0].get<std::int32_t>();
                n.threshold = jn[1].get<double>();
                n.left = jn[2].get<std::int32_t>();
                n.right = jn[3].get<std::int32_t>();
                n.cls = jn[4].get<std::uint8_t>();
                n.count0 = jn[5].get<std::uint32_t>();
                n.count1 = jn[6].get<std::uint32_t>();
                t.nodes.push_back(n);
            }
            const auto size = static_cast<std::int32_t>(t.nodes.size());
            if (size == 0) {
                fail(ErrorCode::CorruptModel, "tree without nodes");
            }
            for (std::int32_t i = 0; i < size; ++i) {
                const auto& n = t.nodes[static_cast<std::size_t>(i)];
                const bool ok = n.is_leaf()
                                    ? (n.left == -1 && n.right == -1 && n.cls <= 1)
                                    : (n.feature < static_cast<std::int32_t>(m.n_features) && n.left > i &&
                                       n.right > i && n.left < size && n.right < size);
                if (!ok) {
                    fail(ErrorCode::CorruptModel, "inconsistent node " + std::to_string(i));
                }
            }
            m.trees.push_back(std::move(t));
        }
        if (m.trees.empty() || m.trees.size() != m.hp.tree_count()) {
            fail(ErrorCode::CorruptModel, "tree count does not match hyperparameters");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptModel, e.what());
    }
}

} // namespace greenflow
