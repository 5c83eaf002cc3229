// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver for the full pipeline. Exit codes: 0 success,
// 2 validation error, 3 missing prerequisite, 4 numeric divergence.

#include <CLI11.hpp>

#include "reganie/pipeline/pipeline.hpp"

using namespace reganie;

namespace {

ExperimentConfig build_config(const std::string& config_file,
                              const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = ExperimentConfig::load(config_file);
    for (const std::string& kv : overrides) {
        const size_t eq = kv.find('=');
        check(eq != std::string::npos, "--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-phase latent-editing pipeline on a procedural toy image domain"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    app.add_option("--config", config_file, "configuration file (key=value lines)");
    app.add_option("--set", overrides, "override a config key, e.g. --set seed=3")
        ->take_all();

    bool resume = false;
    std::string attr, out_dir = "";
    double alpha = 1.0;
    std::vector<std::string> files;

    auto* synth = app.add_subcommand("synth-data", "render the procedural dataset");
    auto* tgan = app.add_subcommand("train-gan", "train the generator stage");
    auto* tenc = app.add_subcommand("train-encoder", "train the embedding encoder");
    auto* fdir = app.add_subcommand("fit-direction", "fit latent edit directions");
    auto* trec = app.add_subcommand("train-rectifier", "train the rectifying network");
    auto* rect = app.add_subcommand("rectify", "run inference on image files");
    auto* eval = app.add_subcommand("evaluate", "write reconstruction and edit reports");
    auto* repo = app.add_subcommand("report", "condense reports into a summary");

    for (auto* sc : {tgan, tenc, trec})
        sc->add_flag("--resume", resume, "continue from an existing checkpoint");
    rect->add_option("--attr", attr, "attribute to edit")->required();
    rect->add_option("--alpha", alpha, "edit strength");
    rect->add_option("--out", out_dir, "output directory")->required();
    rect->add_option("files", files, "input PPM images")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = build_config(config_file, overrides);
        if (synth->parsed()) {
            pipeline::run_synth_data(cfg);
        } else if (tgan->parsed()) {
            pipeline::run_train_gan<float>(cfg, resume);
        } else if (tenc->parsed()) {
            pipeline::run_train_encoder<float>(cfg, resume);
        } else if (fdir->parsed()) {
            pipeline::run_fit_direction<float>(cfg);
        } else if (trec->parsed()) {
            pipeline::run_train_rectifier<float>(cfg, resume);
        } else if (rect->parsed()) {
            auto outcome = pipeline::run_rectify<float>(cfg, files, attr, alpha, out_dir);
            std::printf("rectify: %d written, %d failed\n", outcome.written,
                        outcome.failed);
            if (outcome.failed > 0) return 2;
        } else if (eval->parsed()) {
            pipeline::run_evaluate<float>(cfg);
        } else if (repo->parsed()) {
            pipeline::run_report(cfg);
        }
    } catch (const pipeline::MissingPrerequisiteError& e) {
        std::fprintf(stderr, "missing prerequisite: %s\n", e.what());
        return 3;
    } catch (const stylegen::NumericError& e) {
        std::fprintf(stderr, "numeric divergence: %s\n", e.what());
        return 4;
    } catch (const TensorError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    }
    return 0;
}
