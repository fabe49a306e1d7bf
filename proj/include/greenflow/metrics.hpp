#pragma once

// Confusion-matrix metrics. Positive class = malicious (1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "greenflow/error.hpp"

namespace greenflow {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }

    void add(std::uint8_t predicted, std::uint8_t actual) {
        if (actual) {
            (predicted ? tp : fn) += 1;
        } else {
            (predicted ? fp : tn) += 1;
        }
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.size() != labels.size()) {
        fail(ErrorCode::LengthMismatch, "confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                                            std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) {
            fail(ErrorCode::InvalidArgument, "confusion: label must be 0 or 1");
        }
        cm.add(predictions[i] ? 1 : 0, labels[i]);
    }
    return cm;
}

/// Matthews correlation. 0 when any marginal is empty.
inline double mcc(const ConfusionMatrix& cm) {
    const std::uint64_t p_pred = cm.tp + cm.fp;
    const std::uint64_t p_true = cm.tp + cm.fn;
    const std::uint64_t n_true = cm.tn + cm.fp;
    const std::uint64_t n_pred = cm.tn + cm.fn;
    if (p_pred == 0 || p_true == 0 || n_true == 0 || n_pred == 0) {
        return 0.0;
    }
    // The numerator is exact in 128 bits; the denominator is split into two
    // square roots so no intermediate leaves double range.
    const __int128 num = static_cast<__int128>(cm.tp) * cm.tn - static_cast<__int128>(cm.fp) * cm.fn;
    const double den = std::sqrt(static_cast<double>(p_pred) * static_cast<double>(p_true)) *
                       std::sqrt(static_cast<double>(n_true) * static_cast<double>(n_pred));
    const double r = static_cast<double>(num) / den;
    return std::clamp(r, -1.0, 1.0);
}

inline double balanced_accuracy(const ConfusionMatrix& cm) {
    const double tpr = cm.tp + cm.fn ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : 0.0;
    const double tnr = cm.tn + cm.fp ? static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp) : 0.0;
    return 0.5 * (tpr + tnr);
}

inline double f1(const ConfusionMatrix& cm) {
    const std::uint64_t den = 2 * cm.tp + cm.fp + cm.fn;
    return den ? 2.0 * static_cast<double>(cm.tp) / static_cast<double>(den) : 0.0;
}

} // namespace greenflow
