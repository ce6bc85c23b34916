#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

// counts(i, j) = pixels with ground truth class i predicted as class j.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<int64_t> counts;

    explicit ConfusionMatrix(int c) : classes(c), counts(static_cast<size_t>(c) * c, 0) {
        if (c <= 0) throw std::invalid_argument("ConfusionMatrix: classes must be > 0");
    }

    int64_t& at(int gt, int pred) { return counts[static_cast<size_t>(gt) * classes + pred]; }
    int64_t at(int gt, int pred) const { return counts[static_cast<size_t>(gt) * classes + pred]; }

    int64_t total() const {
        int64_t t = 0;
        for (int64_t v : counts) t += v;
        return t;
    }
    int64_t row_sum(int i) const {
        int64_t t = 0;
        for (int j = 0; j < classes; ++j) t += at(i, j);
        return t;
    }
    int64_t col_sum(int j) const {
        int64_t t = 0;
        for (int i = 0; i < classes; ++i) t += at(i, j);
        return t;
    }

    void merge(const ConfusionMatrix& other) {
        if (other.classes != classes) throw std::invalid_argument("ConfusionMatrix::merge: class count mismatch");
        for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    }
};

inline ConfusionMatrix confusion(const MaskGrid& pred, const MaskGrid& gt, int classes) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw std::invalid_argument("confusion: shape mismatch");
    ConfusionMatrix cm(classes);
    for (size_t i = 0; i < pred.size(); ++i) {
        if (gt.values[i] >= classes || pred.values[i] >= classes)
            throw std::invalid_argument("confusion: class index out of range");
        cm.at(gt.values[i], pred.values[i])++;
    }
    return cm;
}

// Metric value plus a degenerate-denominator flag (value forced to 0 or the
// stated convention when flagged).
struct Flagged {
    double value = 0.0;
    bool degenerate = false;
};

inline double overall_accuracy(const ConfusionMatrix& cm) {
    int64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("overall_accuracy: empty matrix");
    int64_t diag = 0;
    for (int i = 0; i < cm.classes; ++i) diag += cm.at(i, i);
    return static_cast<double>(diag) / static_cast<double>(total);
}

// Per-class recall: diagonal over row sum.
inline Flagged per_class_accuracy(const ConfusionMatrix& cm, int cls) {
    int64_t row = cm.row_sum(cls);
    if (row == 0) return {0.0, true};
    return {static_cast<double>(cm.at(cls, cls)) / static_cast<double>(row), false};
}

inline Flagged kappa(const ConfusionMatrix& cm) {
    int64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("kappa: empty matrix");
    double n = static_cast<double>(total);
    double po = overall_accuracy(cm);
    double pe = 0.0;
    for (int i = 0; i < cm.classes; ++i)
        pe += (static_cast<double>(cm.row_sum(i)) / n) * (static_cast<double>(cm.col_sum(i)) / n);
    if (std::abs(1.0 - pe) < 1e-15) return {po >= 1.0 ? 1.0 : 0.0, true};
    return {(po - pe) / (1.0 - pe), false};
}

inline Flagged precision_of(const ConfusionMatrix& cm, int cls) {
    int64_t col = cm.col_sum(cls);
    if (col == 0) return {0.0, true};
    return {static_cast<double>(cm.at(cls, cls)) / static_cast<double>(col), false};
}

inline Flagged f1(const ConfusionMatrix& cm, int cls) {
    Flagged p = precision_of(cm, cls);
    Flagged r = per_class_accuracy(cm, cls);
    if (p.degenerate || r.degenerate || p.value + r.value == 0.0) return {0.0, true};
    return {2.0 * p.value * r.value / (p.value + r.value), false};
}

struct RegressionMetrics {
    double mse = 0.0;
    double cosine_similarity = 0.0;
    bool cosine_degenerate = false;
};

inline RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw std::invalid_argument("regression_metrics: shape mismatch");
    RegressionMetrics m;
    double dot = 0.0, np2 = 0.0, ny2 = 0.0, sq = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double d = target[i] - pred[i];
        sq += d * d;
        dot += pred[i] * target[i];
        np2 += pred[i] * pred[i];
        ny2 += target[i] * target[i];
    }
    m.mse = sq / static_cast<double>(pred.size());
    double np = std::sqrt(np2), ny = std::sqrt(ny2);
    if (np < 1e-12 || ny < 1e-12) {
        m.cosine_similarity = 0.0;
        m.cosine_degenerate = true;
    } else {
        m.cosine_similarity = dot / (np * ny);
    }
    return m;
}

}  // namespace fuzzyseg
