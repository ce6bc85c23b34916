#pragma once

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzyseg/grid.hpp"
#include "fuzzyseg/losses.hpp"

namespace fuzzyseg {

enum class HeadKind { SoftmaxC, Sigmoid1 };

struct UNetConfig {
    int in_channels = 3;
    int classes = 2;
    int depth = 2;
    int base_channels = 8;
    HeadKind head = HeadKind::SoftmaxC;

    int out_channels() const { return head == HeadKind::SoftmaxC ? classes : 1; }
    int level_channels(int level) const { return base_channels << level; }  // level in [0, depth]

    void validate() const {
        if (in_channels < 1 || classes < 2 || depth < 1 || base_channels < 1)
            throw std::invalid_argument("UNetConfig: invalid field");
    }
    void check_input(int h, int w) const {
        int f = 1 << depth;
        if (h % f != 0 || w % f != 0)
            throw std::invalid_argument("UNetConfig: input spatial side must be divisible by 2^depth");
    }
};

// Named weight tensor. Convolutions are 3x3 with shape [out, in, 3, 3];
// biases are [out].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        v.assign(n, 0.0);
    }
    size_t numel() const { return v.size(); }
};

using ParamStore = std::map<std::string, Tensor>;

namespace unet_detail {

inline void add_conv(ParamStore& ps, const std::string& name, int out_ch, int in_ch) {
    ps[name + ".w"] = Tensor({out_ch, in_ch, 3, 3});
    ps[name + ".b"] = Tensor({out_ch});
}

}  // namespace unet_detail

// Layer names in forward order. Decoder levels are indexed like the encoder
// level whose skip they consume.
inline std::vector<std::string> layer_names(const UNetConfig& cfg) {
    std::vector<std::string> names;
    for (int l = 0; l < cfg.depth; ++l) {
        names.push_back("enc" + std::to_string(l) + ".conv1");
        names.push_back("enc" + std::to_string(l) + ".conv2");
    }
    names.push_back("bottleneck.conv1");
    names.push_back("bottleneck.conv2");
    for (int l = cfg.depth - 1; l >= 0; --l) {
        names.push_back("dec" + std::to_string(l) + ".up");
        names.push_back("dec" + std::to_string(l) + ".conv1");
        names.push_back("dec" + std::to_string(l) + ".conv2");
    }
    names.push_back("head");
    return names;
}

inline ParamStore make_param_store(const UNetConfig& cfg) {
    cfg.validate();
    ParamStore ps;
    int prev = cfg.in_channels;
    for (int l = 0; l < cfg.depth; ++l) {
        int ch = cfg.level_channels(l);
        unet_detail::add_conv(ps, "enc" + std::to_string(l) + ".conv1", ch, prev);
        unet_detail::add_conv(ps, "enc" + std::to_string(l) + ".conv2", ch, ch);
        prev = ch;
    }
    int bch = cfg.level_channels(cfg.depth);
    unet_detail::add_conv(ps, "bottleneck.conv1", bch, prev);
    unet_detail::add_conv(ps, "bottleneck.conv2", bch, bch);
    prev = bch;
    for (int l = cfg.depth - 1; l >= 0; --l) {
        int ch = cfg.level_channels(l);
        unet_detail::add_conv(ps, "dec" + std::to_string(l) + ".up", ch, prev);
        unet_detail::add_conv(ps, "dec" + std::to_string(l) + ".conv1", ch, 2 * ch);
        unet_detail::add_conv(ps, "dec" + std::to_string(l) + ".conv2", ch, ch);
        prev = ch;
    }
    unet_detail::add_conv(ps, "head", cfg.out_channels(), prev);
    return ps;
}

// He-uniform over fan-in; biases zero. Deterministic in (config, seed).
inline ParamStore init_params(const UNetConfig& cfg, uint64_t seed) {
    ParamStore ps = make_param_store(cfg);
    std::mt19937_64 rng(seed);
    for (auto& [name, t] : ps) {
        if (t.shape.size() == 4) {
            int fan_in = t.shape[1] * t.shape[2] * t.shape[3];
            double limit = std::sqrt(6.0 / fan_in);
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (double& w : t.v) w = dist(rng);
        }
    }
    return ps;
}

// --- primitive forward/backward ops ----------------------------------------

namespace unet_detail {

inline Grid3D conv3x3(const Grid3D& in, const Tensor& w, const Tensor& b) {
    int out_ch = w.shape[0], in_ch = w.shape[1];
    if (in.channels != in_ch) throw std::invalid_argument("conv3x3: channel mismatch");
    Grid3D out(out_ch, in.height, in.width);
    for (int o = 0; o < out_ch; ++o) {
        for (int r = 0; r < in.height; ++r)
            for (int c = 0; c < in.width; ++c) {
                double acc = b.v[o];
                for (int i = 0; i < in_ch; ++i)
                    for (int dr = -1; dr <= 1; ++dr) {
                        int rr = r + dr;
                        if (rr < 0 || rr >= in.height) continue;
                        for (int dc = -1; dc <= 1; ++dc) {
                            int cc = c + dc;
                            if (cc < 0 || cc >= in.width) continue;
                            acc += w.v[((static_cast<size_t>(o) * in_ch + i) * 3 + (dr + 1)) * 3 + (dc + 1)] *
                                   in.at(i, rr, cc);
                        }
                    }
                out.at(o, r, c) = acc;
            }
    }
    return out;
}

inline Grid3D conv3x3_backward(const Grid3D& in, const Tensor& w, const Grid3D& dout, Tensor& dw, Tensor& db) {
    int out_ch = w.shape[0], in_ch = w.shape[1];
    Grid3D din(in.channels, in.height, in.width, 0.0);
    for (int o = 0; o < out_ch; ++o) {
        for (int r = 0; r < in.height; ++r)
            for (int c = 0; c < in.width; ++c) {
                double g = dout.at(o, r, c);
                if (g == 0.0) continue;
                db.v[o] += g;
                for (int i = 0; i < in_ch; ++i)
                    for (int dr = -1; dr <= 1; ++dr) {
                        int rr = r + dr;
                        if (rr < 0 || rr >= in.height) continue;
                        for (int dc = -1; dc <= 1; ++dc) {
                            int cc = c + dc;
                            if (cc < 0 || cc >= in.width) continue;
                            size_t wi = ((static_cast<size_t>(o) * in_ch + i) * 3 + (dr + 1)) * 3 + (dc + 1);
                            dw.v[wi] += g * in.at(i, rr, cc);
                            din.at(i, rr, cc) += g * w.v[wi];
                        }
                    }
            }
    }
    return din;
}

inline Grid3D relu(const Grid3D& pre) {
    Grid3D out = pre;
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    return out;
}

inline Grid3D relu_backward(const Grid3D& pre, const Grid3D& dout) {
    Grid3D din = dout;
    for (size_t i = 0; i < din.values.size(); ++i)
        if (pre.values[i] <= 0.0) din.values[i] = 0.0;
    return din;
}

// 2x2 max-pool, stride 2; argmax recorded for the backward scatter
// (ties go to the first element in scan order).
inline Grid3D maxpool2(const Grid3D& in, std::vector<int>& argmax) {
    Grid3D out(in.channels, in.height / 2, in.width / 2);
    argmax.assign(out.size(), 0);
    size_t idx = 0;
    for (int ch = 0; ch < in.channels; ++ch)
        for (int r = 0; r < out.height; ++r)
            for (int c = 0; c < out.width; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                int best_pos = 0;
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc) {
                        double v = in.at(ch, 2 * r + dr, 2 * c + dc);
                        if (v > best) {
                            best = v;
                            best_pos = dr * 2 + dc;
                        }
                    }
                out.at(ch, r, c) = best;
                argmax[idx++] = best_pos;
            }
    return out;
}

inline Grid3D maxpool2_backward(const Grid3D& dout, const std::vector<int>& argmax, int in_h, int in_w) {
    Grid3D din(dout.channels, in_h, in_w, 0.0);
    size_t idx = 0;
    for (int ch = 0; ch < dout.channels; ++ch)
        for (int r = 0; r < dout.height; ++r)
            for (int c = 0; c < dout.width; ++c) {
                int pos = argmax[idx++];
                din.at(ch, 2 * r + pos / 2, 2 * c + pos % 2) += dout.at(ch, r, c);
            }
    return din;
}

inline Grid3D upsample_nn2(const Grid3D& in) {
    Grid3D out(in.channels, in.height * 2, in.width * 2);
    for (int ch = 0; ch < in.channels; ++ch)
        for (int r = 0; r < out.height; ++r)
            for (int c = 0; c < out.width; ++c) out.at(ch, r, c) = in.at(ch, r / 2, c / 2);
    return out;
}

inline Grid3D upsample_nn2_backward(const Grid3D& dout) {
    Grid3D din(dout.channels, dout.height / 2, dout.width / 2, 0.0);
    for (int ch = 0; ch < dout.channels; ++ch)
        for (int r = 0; r < dout.height; ++r)
            for (int c = 0; c < dout.width; ++c) din.at(ch, r / 2, c / 2) += dout.at(ch, r, c);
    return din;
}

inline Grid3D concat_channels(const Grid3D& a, const Grid3D& b) {
    Grid3D out(a.channels + b.channels, a.height, a.width);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.values.size());
    return out;
}

inline Grid3D softmax_channels(const Grid3D& logits) {
    Grid3D out(logits.channels, logits.height, logits.width);
    for (int r = 0; r < logits.height; ++r)
        for (int c = 0; c < logits.width; ++c) {
            double mx = logits.at(0, r, c);
            for (int ch = 1; ch < logits.channels; ++ch) mx = std::max(mx, logits.at(ch, r, c));
            double sum = 0.0;
            for (int ch = 0; ch < logits.channels; ++ch) {
                double e = std::exp(logits.at(ch, r, c) - mx);
                out.at(ch, r, c) = e;
                sum += e;
            }
            for (int ch = 0; ch < logits.channels; ++ch) out.at(ch, r, c) /= sum;
        }
    return out;
}

inline Grid3D softmax_backward(const Grid3D& probs, const Grid3D& dprobs) {
    Grid3D dlogits(probs.channels, probs.height, probs.width);
    for (int r = 0; r < probs.height; ++r)
        for (int c = 0; c < probs.width; ++c) {
            double dot = 0.0;
            for (int ch = 0; ch < probs.channels; ++ch) dot += dprobs.at(ch, r, c) * probs.at(ch, r, c);
            for (int ch = 0; ch < probs.channels; ++ch)
                dlogits.at(ch, r, c) = probs.at(ch, r, c) * (dprobs.at(ch, r, c) - dot);
        }
    return dlogits;
}

}  // namespace unet_detail

// --- forward / backward ------------------------------------------------------

struct ConvCache {
    Grid3D in;
    Grid3D pre;  // pre-activation output
};

struct EncoderCache {
    ConvCache c1, c2;
    std::vector<int> pool_argmax;
};

struct DecoderCache {
    Grid3D up_in;  // input to the nearest-neighbor upsample
    ConvCache up;  // conv after the upsample (linear)
    ConvCache c1, c2;
};

struct ForwardCache {
    std::vector<EncoderCache> enc;
    ConvCache bott1, bott2;
    std::vector<DecoderCache> dec;  // dec[l] corresponds to encoder level l
    ConvCache head;
    Grid3D probs;
    bool valid = false;
};

inline Grid3D forward(const UNetConfig& cfg, const ParamStore& params, const Grid3D& input, ForwardCache& cache) {
    cfg.validate();
    cfg.check_input(input.height, input.width);
    if (input.channels != cfg.in_channels) throw std::invalid_argument("forward: input channel mismatch");
    using namespace unet_detail;

    auto conv = [&](const std::string& name, const Grid3D& x, ConvCache& cc) {
        cc.in = x;
        cc.pre = conv3x3(x, params.at(name + ".w"), params.at(name + ".b"));
        return cc.pre;
    };

    cache = ForwardCache{};
    cache.enc.resize(cfg.depth);
    cache.dec.resize(cfg.depth);

    Grid3D x = input;
    std::vector<Grid3D> skips(cfg.depth);
    for (int l = 0; l < cfg.depth; ++l) {
        auto& ec = cache.enc[l];
        std::string base = "enc" + std::to_string(l);
        x = relu(conv(base + ".conv1", x, ec.c1));
        x = relu(conv(base + ".conv2", x, ec.c2));
        skips[l] = x;
        x = maxpool2(x, ec.pool_argmax);
    }
    x = relu(conv("bottleneck.conv1", x, cache.bott1));
    x = relu(conv("bottleneck.conv2", x, cache.bott2));
    for (int l = cfg.depth - 1; l >= 0; --l) {
        auto& dc = cache.dec[l];
        std::string base = "dec" + std::to_string(l);
        dc.up_in = x;
        Grid3D up = conv(base + ".up", upsample_nn2(x), dc.up);  // linear
        Grid3D z = concat_channels(up, skips[l]);
        x = relu(conv(base + ".conv1", z, dc.c1));
        x = relu(conv(base + ".conv2", x, dc.c2));
    }
    Grid3D logits = conv("head", x, cache.head);
    cache.probs = (cfg.head == HeadKind::SoftmaxC)
                      ? softmax_channels(logits)
                      : [&] {
                            Grid3D p = logits;
                            for (double& v : p.values) v = 1.0 / (1.0 + std::exp(-v));
                            return p;
                        }();
    cache.valid = true;
    return cache.probs;
}

inline Grid3D forward(const UNetConfig& cfg, const ParamStore& params, const Grid3D& input) {
    ForwardCache cache;
    return forward(cfg, params, input, cache);
}

// Gradients of the loss with respect to every parameter, given d loss / d probs.
inline ParamStore backward(const UNetConfig& cfg, const ParamStore& params, const ForwardCache& cache,
                           const Grid3D& dprobs) {
    if (!cache.valid) throw std::invalid_argument("backward: stale or missing forward cache");
    using namespace unet_detail;
    ParamStore grads = make_param_store(cfg);

    auto conv_back = [&](const std::string& name, const ConvCache& cc, const Grid3D& dout) {
        return conv3x3_backward(cc.in, params.at(name + ".w"), dout, grads.at(name + ".w"), grads.at(name + ".b"));
    };

    Grid3D dlogits;
    if (cfg.head == HeadKind::SoftmaxC) {
        dlogits = softmax_backward(cache.probs, dprobs);
    } else {
        dlogits = dprobs;
        for (size_t i = 0; i < dlogits.values.size(); ++i) {
            double p = cache.probs.values[i];
            dlogits.values[i] *= p * (1.0 - p);
        }
    }
    Grid3D dx = conv_back("head", cache.head, dlogits);

    std::vector<Grid3D> dskips(cfg.depth);
    for (int l = 0; l < cfg.depth; ++l) {
        const auto& dc = cache.dec[l];
        std::string base = "dec" + std::to_string(l);
        dx = conv_back(base + ".conv2", dc.c2, relu_backward(dc.c2.pre, dx));
        Grid3D dz = conv_back(base + ".conv1", dc.c1, relu_backward(dc.c1.pre, dx));
        // split the channel concat: first half to the up path, second to the skip
        int up_ch = dc.up.pre.channels;
        Grid3D dup(up_ch, dz.height, dz.width);
        dskips[l] = Grid3D(dz.channels - up_ch, dz.height, dz.width);
        std::copy(dz.values.begin(), dz.values.begin() + dup.values.size(), dup.values.begin());
        std::copy(dz.values.begin() + dup.values.size(), dz.values.end(), dskips[l].values.begin());
        dx = upsample_nn2_backward(conv_back(base + ".up", dc.up, dup));
    }

    dx = conv_back("bottleneck.conv2", cache.bott2, relu_backward(cache.bott2.pre, dx));
    dx = conv_back("bottleneck.conv1", cache.bott1, relu_backward(cache.bott1.pre, dx));

    for (int l = cfg.depth - 1; l >= 0; --l) {
        const auto& ec = cache.enc[l];
        std::string base = "enc" + std::to_string(l);
        Grid3D da2 = maxpool2_backward(dx, ec.pool_argmax, ec.c2.pre.height, ec.c2.pre.width);
        for (size_t i = 0; i < da2.values.size(); ++i) da2.values[i] += dskips[l].values[i];
        dx = conv_back(base + ".conv2", ec.c2, relu_backward(ec.c2.pre, da2));
        dx = conv_back(base + ".conv1", ec.c1, relu_backward(ec.c1.pre, dx));
    }
    return grads;
}

// --- class assignment --------------------------------------------------------

inline MaskGrid assign_classes(const UNetConfig& cfg, const Grid3D& probs, double threshold = 0.5) {
    MaskGrid out(probs.height, probs.width);
    if (cfg.head == HeadKind::SoftmaxC) {
        for (int r = 0; r < probs.height; ++r)
            for (int c = 0; c < probs.width; ++c) {
                int best = 0;
                for (int ch = 1; ch < probs.channels; ++ch)
                    if (probs.at(ch, r, c) > probs.at(best, r, c)) best = ch;  // ties -> lower index
                out.at(r, c) = static_cast<uint8_t>(best);
            }
    } else {
        if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("assign_classes: threshold out of (0,1)");
        for (size_t i = 0; i < probs.values.size(); ++i) out.values[i] = probs.values[i] >= threshold ? 1 : 0;
    }
    return out;
}

// --- Nadam -------------------------------------------------------------------

struct OptimizerState {
    ParamStore m, v;  // first/second moment accumulators
    int64_t t = 0;
    double lr0 = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double gamma = 0.97;  // per-epoch lr decay
    int epoch = 0;

    double effective_lr() const { return lr0 * std::pow(gamma, epoch); }

    static OptimizerState create(const UNetConfig& cfg) {
        OptimizerState s;
        s.m = make_param_store(cfg);
        s.v = make_param_store(cfg);
        return s;
    }
};

// Adam with Nesterov momentum (Nadam), bias-corrected.
inline void nadam_step(ParamStore& params, const ParamStore& grads, OptimizerState& state) {
    for (const auto& [name, g] : grads)
        for (double gv : g.v)
            if (!std::isfinite(gv))
                throw std::runtime_error("nadam_step: non-finite gradient in '" + name + "', step rejected");
    state.t += 1;
    double lr = state.effective_lr();
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params) {
        const auto& g = grads.at(name);
        auto& m = state.m.at(name);
        auto& v = state.v.at(name);
        for (size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = state.beta1 * m.v[i] + (1.0 - state.beta1) * g.v[i];
            v.v[i] = state.beta2 * v.v[i] + (1.0 - state.beta2) * g.v[i] * g.v[i];
            double m_hat = m.v[i] / bc1;
            double v_hat = v.v[i] / bc2;
            double nesterov = state.beta1 * m_hat + (1.0 - state.beta1) * g.v[i] / bc1;
            p.v[i] -= lr * nesterov / (std::sqrt(v_hat) + state.eps);
        }
    }
}

// --- training ----------------------------------------------------------------

struct Sample {
    Grid3D image;   // in_channels x H x W
    Grid2D target;  // foreground confidence (hard masks as 0/1)
};

struct TrainOptions {
    int epochs = 10;
    int batch_size = 4;
    uint64_t seed = 0;
    int max_steps = 0;  // 0 = unlimited
    double lr0 = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double gamma = 0.97;
};

// Training loss between the network output and a foreground-confidence
// target. Softmax C=2 regresses channel 1 against the target and channel 0
// against its complement; cosine uses the flattened foreground channel only.
inline LossResult training_loss(const UNetConfig& cfg, const Grid3D& probs, const Grid2D& target, LossKind kind,
                                Grid3D& dprobs) {
    if (probs.height != target.height || probs.width != target.width)
        throw std::invalid_argument("training_loss: shape mismatch");
    size_t npix = target.values.size();
    dprobs = Grid3D(probs.channels, probs.height, probs.width, 0.0);
    if (cfg.head == HeadKind::Sigmoid1 || kind == LossKind::Cosine) {
        int fg = (cfg.head == HeadKind::Sigmoid1) ? 0 : 1;
        Grid2D pred = probs.channel(fg);
        LossResult res = evaluate_loss(kind, pred.values, target.values);
        std::copy(res.grad.begin(), res.grad.end(), dprobs.values.begin() + static_cast<size_t>(fg) * npix);
        return res;
    }
    if (probs.channels != 2) throw std::invalid_argument("training_loss: softmax head expects C = 2");
    std::vector<double> pred(2 * npix), tgt(2 * npix);
    std::copy(probs.values.begin(), probs.values.end(), pred.begin());
    for (size_t i = 0; i < npix; ++i) {
        tgt[i] = 1.0 - target.values[i];
        tgt[npix + i] = target.values[i];
    }
    LossResult res = evaluate_loss(kind, pred, tgt);
    std::copy(res.grad.begin(), res.grad.end(), dprobs.values.begin());
    return res;
}

struct TrainResult {
    ParamStore params;
    std::vector<double> epoch_loss;  // mean training loss per epoch
    int steps = 0;
};

inline TrainResult train(const std::vector<Sample>& dataset, const UNetConfig& cfg, LossKind loss,
                         const TrainOptions& opt) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    cfg.validate();
    for (const auto& s : dataset) cfg.check_input(s.image.height, s.image.width);

    TrainResult result;
    result.params = init_params(cfg, opt.seed);
    OptimizerState state = OptimizerState::create(cfg);
    state.lr0 = opt.lr0;
    state.beta1 = opt.beta1;
    state.beta2 = opt.beta2;
    state.eps = opt.eps;
    state.gamma = opt.gamma;

    std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int e = 0; e < opt.epochs; ++e) {
        state.epoch = e;
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_acc = 0.0;
        int epoch_batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch_size)) {
            if (opt.max_steps > 0 && result.steps >= opt.max_steps) break;
            size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
            ParamStore batch_grads = make_param_store(cfg);
            double batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const Sample& s = dataset[order[k]];
                ForwardCache cache;
                Grid3D probs = forward(cfg, result.params, s.image, cache);
                Grid3D dprobs;
                LossResult lr = training_loss(cfg, probs, s.target, loss, dprobs);
                batch_loss += lr.loss;
                ParamStore g = backward(cfg, result.params, cache, dprobs);
                for (auto& [name, t] : batch_grads) {
                    const auto& gv = g.at(name);
                    for (size_t i = 0; i < t.v.size(); ++i) t.v[i] += gv.v[i];
                }
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (auto& [name, t] : batch_grads)
                for (double& v : t.v) v *= inv;
            batch_loss *= inv;
            if (!std::isfinite(batch_loss)) throw std::runtime_error("train: diverged (non-finite loss)");
            nadam_step(result.params, batch_grads, state);
            result.steps += 1;
            epoch_acc += batch_loss;
            epoch_batches += 1;
        }
        if (epoch_batches > 0) result.epoch_loss.push_back(epoch_acc / epoch_batches);
        if (opt.max_steps > 0 && result.steps >= opt.max_steps) break;
    }
    return result;
}

}  // namespace fuzzyseg
