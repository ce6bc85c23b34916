#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzyseg/grid.hpp"

namespace fuzzyseg {

enum class LossKind { BceTarget, BceFull, Mse, Cosine };

inline LossKind parse_loss_kind(const std::string& s) {
    if (s == "bce-target") return LossKind::BceTarget;
    if (s == "bce-full") return LossKind::BceFull;
    if (s == "mse") return LossKind::Mse;
    if (s == "cosine") return LossKind::Cosine;
    throw std::invalid_argument("unknown loss kind: " + s);
}

inline std::string loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::BceTarget: return "bce-target";
        case LossKind::BceFull: return "bce-full";
        case LossKind::Mse: return "mse";
        case LossKind::Cosine: return "cosine";
    }
    return "?";
}

constexpr double kProbClamp = 1e-7;

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d pred, same length as pred
};

namespace detail {
inline void check_shapes(std::span<const double> pred, std::span<const double> target, const char* op) {
    if (pred.size() != target.size() || pred.empty())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}
inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }
}  // namespace detail

// Cross-entropy against fuzzy targets. The target-only variant keeps only the
// -y*log(p) term; the full variant is standard binary cross-entropy.
// Mean reduction over elements.
inline LossResult loss_bce(std::span<const double> pred, std::span<const double> target, bool full_variant) {
    detail::check_shapes(pred, target, "loss_bce");
    size_t n = pred.size();
    LossResult res;
    res.grad.resize(n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double p = detail::clamp_prob(pred[i]);
        double y = target[i];
        if (full_variant) {
            acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            res.grad[i] = (p - y) / (p * (1.0 - p)) / static_cast<double>(n);
        } else {
            acc += -y * std::log(p);
            res.grad[i] = -y / p / static_cast<double>(n);
        }
    }
    res.loss = acc / static_cast<double>(n);
    return res;
}

inline LossResult loss_mse(std::span<const double> pred, std::span<const double> target) {
    detail::check_shapes(pred, target, "loss_mse");
    size_t n = pred.size();
    LossResult res;
    res.grad.resize(n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = target[i] - pred[i];
        acc += d * d;
        res.grad[i] = 2.0 * (pred[i] - target[i]) / static_cast<double>(n);
    }
    res.loss = acc / static_cast<double>(n);
    return res;
}

// 1 - cos(pred, target) over the flattened rasters. Degenerate norms
// (< 1e-12) yield loss 1 with zero gradient.
inline LossResult loss_cosine(std::span<const double> pred, std::span<const double> target) {
    detail::check_shapes(pred, target, "loss_cosine");
    size_t n = pred.size();
    LossResult res;
    res.grad.assign(n, 0.0);
    double dot = 0.0, np2 = 0.0, ny2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        dot += pred[i] * target[i];
        np2 += pred[i] * pred[i];
        ny2 += target[i] * target[i];
    }
    double np = std::sqrt(np2), ny = std::sqrt(ny2);
    if (np < 1e-12 || ny < 1e-12) {
        res.loss = 1.0;
        return res;
    }
    double cosine = dot / (np * ny);
    res.loss = 1.0 - cosine;
    for (size_t i = 0; i < n; ++i)
        res.grad[i] = -(target[i] / (ny * np) - dot * pred[i] / (ny * np * np * np));
    return res;
}

inline LossResult evaluate_loss(LossKind kind, std::span<const double> pred, std::span<const double> target) {
    switch (kind) {
        case LossKind::BceTarget: return loss_bce(pred, target, false);
        case LossKind::BceFull: return loss_bce(pred, target, true);
        case LossKind::Mse: return loss_mse(pred, target);
        case LossKind::Cosine: return loss_cosine(pred, target);
    }
    throw std::logic_error("evaluate_loss: bad kind");
}

}  // namespace fuzzyseg
