#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzyseg/fuzzify.hpp"
#include "fuzzyseg/losses.hpp"
#include "fuzzyseg/model.hpp"
#include "fuzzyseg/synth.hpp"
#include "fuzzyseg/tiling.hpp"

namespace fuzzyseg {

// Flat key=value configuration; precedence flags > file > defaults is applied
// by the CLI layer, which simply re-sets keys after loading the file.
struct PipelineConfig {
    // paths
    std::string annotations;  // annotation CSV
    std::string image;        // input image PNG
    std::string mask;         // hard mask PNG
    std::string images_dir;   // training images
    std::string targets_dir;  // training targets (FZM1 or mask PNG)
    std::string checkpoint;
    std::string output_dir = ".";

    // evaluate inputs
    std::string pred_mask;   // predicted segmentation PNG
    std::string gt_mask;     // reference hard mask PNG
    std::string pred_probs;  // predicted probabilities FZM1 (optional)
    std::string gt_fuzzy;    // reference fuzzy GT FZM1 (optional)

    // raster geometry
    GeoTransform geo;
    int height = 0;
    int width = 0;

    KernelSpec kernel;
    Padding padding = Padding::Reflect;
    TileGrid tile{640, 640, Padding::Reflect};

    UNetConfig model;
    LossKind loss = LossKind::BceFull;
    double threshold = 0.5;

    TrainOptions train;

    // synthetic experiment
    SceneSpec scene;
    int n_scenes = 100;
    double holdout_fraction = 0.2;
    std::vector<double> noise_levels = {0.0, 4.0};
    std::vector<LossKind> fuzzy_losses = {LossKind::BceFull, LossKind::Mse, LossKind::Cosine};
};

namespace config_detail {

inline KernelVariant parse_variant(const std::string& s) {
    if (s == "sigma-sq") return KernelVariant::SigmaSq;
    if (s == "standard") return KernelVariant::Standard;
    throw std::invalid_argument("unknown kernel variant: " + s);
}
inline KernelNorm parse_norm(const std::string& s) {
    if (s == "analytic") return KernelNorm::Analytic;
    if (s == "sum-to-one") return KernelNorm::SumToOne;
    throw std::invalid_argument("unknown kernel normalization: " + s);
}
inline Padding parse_padding(const std::string& s) {
    if (s == "zero") return Padding::Zero;
    if (s == "reflect") return Padding::Reflect;
    throw std::invalid_argument("unknown padding: " + s);
}
inline HeadKind parse_head(const std::string& s) {
    if (s == "softmax") return HeadKind::SoftmaxC;
    if (s == "sigmoid") return HeadKind::Sigmoid1;
    throw std::invalid_argument("unknown head: " + s);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace config_detail

inline void apply_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    using namespace config_detail;
    if (key == "annotations") cfg.annotations = value;
    else if (key == "image") cfg.image = value;
    else if (key == "mask") cfg.mask = value;
    else if (key == "images_dir") cfg.images_dir = value;
    else if (key == "targets_dir") cfg.targets_dir = value;
    else if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "pred_mask") cfg.pred_mask = value;
    else if (key == "gt_mask") cfg.gt_mask = value;
    else if (key == "pred_probs") cfg.pred_probs = value;
    else if (key == "gt_fuzzy") cfg.gt_fuzzy = value;
    else if (key == "origin_x") cfg.geo.origin_x = std::stod(value);
    else if (key == "origin_y") cfg.geo.origin_y = std::stod(value);
    else if (key == "resolution") cfg.geo.resolution = std::stod(value);
    else if (key == "height") cfg.height = std::stoi(value);
    else if (key == "width") cfg.width = std::stoi(value);
    else if (key == "sigma_px") cfg.kernel.sigma_px = std::stod(value);
    else if (key == "truncation") cfg.kernel.truncation_factor = std::stod(value);
    else if (key == "kernel_variant") cfg.kernel.variant = parse_variant(value);
    else if (key == "kernel_norm") cfg.kernel.normalization = parse_norm(value);
    else if (key == "padding") cfg.padding = parse_padding(value);
    else if (key == "patch") cfg.tile.patch = std::stoi(value);
    else if (key == "stride") cfg.tile.stride = std::stoi(value);
    else if (key == "pad_policy") cfg.tile.pad_policy = parse_padding(value);
    else if (key == "classes") cfg.model.classes = std::stoi(value);
    else if (key == "depth") cfg.model.depth = std::stoi(value);
    else if (key == "base_channels") cfg.model.base_channels = std::stoi(value);
    else if (key == "head") cfg.model.head = parse_head(value);
    else if (key == "loss") cfg.loss = parse_loss_kind(value);
    else if (key == "threshold") cfg.threshold = std::stod(value);
    else if (key == "epochs") cfg.train.epochs = std::stoi(value);
    else if (key == "batch_size") cfg.train.batch_size = std::stoi(value);
    else if (key == "seed") { cfg.train.seed = std::stoull(value); cfg.scene.seed = cfg.train.seed; }
    else if (key == "max_steps") cfg.train.max_steps = std::stoi(value);
    else if (key == "lr") cfg.train.lr0 = std::stod(value);
    else if (key == "beta1") cfg.train.beta1 = std::stod(value);
    else if (key == "beta2") cfg.train.beta2 = std::stod(value);
    else if (key == "gamma") cfg.train.gamma = std::stod(value);
    else if (key == "scene_height") cfg.scene.height = std::stoi(value);
    else if (key == "scene_width") cfg.scene.width = std::stoi(value);
    else if (key == "n_plants") cfg.scene.n_plants = std::stoi(value);
    else if (key == "radius_min") cfg.scene.radius_min = std::stod(value);
    else if (key == "radius_max") cfg.scene.radius_max = std::stod(value);
    else if (key == "position_jitter") cfg.scene.position_jitter = std::stod(value);
    else if (key == "radius_error") cfg.scene.radius_error = std::stod(value);
    else if (key == "dropout_prob") cfg.scene.dropout_prob = std::stod(value);
    else if (key == "spurious_prob") cfg.scene.spurious_prob = std::stod(value);
    else if (key == "n_scenes") cfg.n_scenes = std::stoi(value);
    else if (key == "holdout_fraction") cfg.holdout_fraction = std::stod(value);
    else if (key == "noise_levels") {
        cfg.noise_levels.clear();
        for (const auto& tok : split(value, ',')) cfg.noise_levels.push_back(std::stod(tok));
    } else if (key == "fuzzy_losses") {
        cfg.fuzzy_losses.clear();
        for (const auto& tok : split(value, ',')) cfg.fuzzy_losses.push_back(parse_loss_kind(tok));
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

// Lines of "key = value"; '#' starts a comment, blank lines ignored.
inline void load_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (blank) continue;
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        apply_config_key(cfg, key, value);
    }
}

}  // namespace fuzzyseg
