#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "fuzzyseg/pipeline.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> sets;  // applied after the file
};

void add_common(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "key=value config file");
    auto grab = [&ov](const std::string& key) {
        return [&ov, key](const std::string& v) { ov.sets.emplace_back(key, v); };
    };
    // flag overrides take precedence over the config file
    for (const char* key : {"loss", "sigma-px", "patch", "stride", "seed", "epochs", "lr", "output-dir",
                            "annotations", "image", "mask", "images-dir", "targets-dir", "checkpoint",
                            "height", "width", "origin-x", "origin-y", "resolution", "max-steps",
                            "pred-mask", "gt-mask", "pred-probs", "gt-fuzzy", "n-scenes", "noise-levels",
                            "batch-size", "depth", "base-channels", "threshold", "head", "kernel-variant",
                            "kernel-norm", "padding", "truncation", "n-plants", "scene-height", "scene-width",
                            "position-jitter", "gamma", "fuzzy-losses", "holdout-fraction"}) {
        std::string config_key(key);
        std::replace(config_key.begin(), config_key.end(), '-', '_');
        cmd->add_option_function<std::string>("--" + std::string(key), grab(config_key));
    }
}

fuzzyseg::PipelineConfig build_config(const Overrides& ov) {
    fuzzyseg::PipelineConfig cfg;
    if (!ov.config_path.empty()) fuzzyseg::load_config_file(cfg, ov.config_path);
    for (const auto& [key, value] : ov.sets) fuzzyseg::apply_config_key(cfg, key, value);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fuzzy-label semantic segmentation pipeline"};
    app.require_subcommand(1);

    Overrides ov;
    void (*commands[])(const fuzzyseg::PipelineConfig&) = {
        fuzzyseg::cmd_rasterize, fuzzyseg::cmd_fuzzify,  fuzzyseg::cmd_train,
        fuzzyseg::cmd_predict,   fuzzyseg::cmd_evaluate, fuzzyseg::cmd_experiment,
    };
    const char* names[] = {"rasterize", "fuzzify", "train", "predict", "evaluate", "experiment"};
    const char* descs[] = {
        "rasterize annotation CSV into a hard mask PNG",
        "Gaussian-soften a hard mask into an FZM1 fuzzy raster",
        "train the segmentation model",
        "run the model over an image, patch-stitched",
        "compute classification and regression metrics",
        "run the conventional-vs-fuzzy comparison matrix on synthetic scenes",
    };
    int selected = -1;
    for (int i = 0; i < 6; ++i) {
        CLI::App* cmd = app.add_subcommand(names[i], descs[i]);
        add_common(cmd, ov);
        cmd->callback([&selected, i] { selected = i; });
    }

    CLI11_PARSE(app, argc, argv);
    try {
        commands[selected](build_config(ov));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
