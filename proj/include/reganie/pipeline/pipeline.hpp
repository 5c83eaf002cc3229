// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage orchestration shared by the command-line driver and the end-to-end
// tests: artifact paths, prerequisite checks, and the evaluation protocol.

#pragma once

#include <cstdio>
#include <cstring>
#include <memory>

#include "reganie/metrics/metrics.hpp"
#include "reganie/training/training.hpp"

namespace reganie::pipeline {

struct MissingPrerequisiteError : TensorError {
    std::string stage;
    MissingPrerequisiteError(const std::string& stage_, const std::string& what)
        : TensorError(what), stage(stage_) {}
};

inline std::string gan_ckpt(const ExperimentConfig& c) { return c.ckpt_path() + "/gan.ckpt"; }
inline std::string encoder_ckpt(const ExperimentConfig& c) {
    return c.ckpt_path() + "/encoder.ckpt";
}
inline std::string rectifier_ckpt(const ExperimentConfig& c) {
    return c.ckpt_path() + "/rectifier.ckpt";
}
inline std::string direction_file(const ExperimentConfig& c, const std::string& attr) {
    return c.ckpt_path() + "/directions/" + attr + ".json";
}

inline void require_artifact(const std::string& path, const std::string& stage) {
    if (!std::filesystem::exists(path))
        throw MissingPrerequisiteError(
            stage, "missing artifact " + path + "; run the '" + stage + "' stage first");
}

// Records the exact configuration a stage ran with, next to its outputs.
inline void archive_config(const ExperimentConfig& cfg, const std::string& stage) {
    std::filesystem::create_directories(cfg.ckpt_path());
    cfg.save(cfg.ckpt_path() + "/" + stage + ".config");
}

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Extracts sample i of a [N,3,H,W] batch as a [3,H,W] double image.
template <typename T>
Tensor<double> metrics_image(const Tensor<T>& batch, int i) {
    const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    Tensor<double> out({c, h, w});
    const int64_t n = (int64_t)c * h * w;
    for (int64_t j = 0; j < n; ++j) out[j] = (double)batch.ptr()[(int64_t)i * n + j];
    return out;
}

// Phase-I bundle loaded from checkpoints.
template <typename T>
struct Phase1 {
    std::unique_ptr<stylegen::StyleGenWorld<T>> gan;
    std::unique_ptr<inversion::InversionWorld<T>> inv;
};

template <typename T>
Phase1<T> load_phase1(const ExperimentConfig& cfg, bool need_encoder) {
    require_artifact(gan_ckpt(cfg), "train-gan");
    Phase1<T> p;
    p.gan = std::make_unique<stylegen::StyleGenWorld<T>>(cfg);
    Checkpoint::load(gan_ckpt(cfg), cfg.phase1_fingerprint())
        .load_params("g", p.gan->ps_g);
    p.inv = std::make_unique<inversion::InversionWorld<T>>(*p.gan);
    if (need_encoder) {
        require_artifact(encoder_ckpt(cfg), "train-encoder");
        Checkpoint::load(encoder_ckpt(cfg), cfg.phase1_fingerprint())
            .load_params("e", p.inv->ps_e);
    }
    return p;
}

template <typename T>
std::unique_ptr<rectifier::RectifierNet<T>> load_rectifier(const ExperimentConfig& cfg) {
    require_artifact(rectifier_ckpt(cfg), "train-rectifier");
    auto net = std::make_unique<rectifier::RectifierNet<T>>(cfg);
    Checkpoint::load(rectifier_ckpt(cfg), cfg.fingerprint()).load_params("r", net->ps);
    return net;
}

inline inversion::EditDirection load_direction(const ExperimentConfig& cfg,
                                               const std::string& attr) {
    require_artifact(direction_file(cfg, attr), "fit-direction");
    return inversion::EditDirection::load(direction_file(cfg, attr));
}

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

inline void run_synth_data(const ExperimentConfig& cfg) {
    auto data = toyworld::sample_dataset(cfg.dataset_n, cfg.seed, cfg.resolution);
    toyworld::export_dataset(cfg.dataset_path(), data);
    archive_config(cfg, "synth-data");
}

// Loads the rendered dataset as a [N,3,res,res] tensor in the working type.
template <typename T>
Tensor<T> load_dataset_images(const ExperimentConfig& cfg) {
    const std::string manifest = cfg.dataset_path() + "/manifest.jsonl";
    require_artifact(manifest, "synth-data");
    std::ifstream mf(manifest);
    std::vector<std::string> files;
    std::string line;
    while (std::getline(mf, line))
        files.push_back(nlohmann::json::parse(line).at("file").get<std::string>());
    check(!files.empty(), "dataset manifest is empty: " + manifest);
    Tensor<T> out({(int)files.size(), 3, cfg.resolution, cfg.resolution});
    const int64_t img = (int64_t)3 * cfg.resolution * cfg.resolution;
    for (size_t i = 0; i < files.size(); ++i) {
        Tensor<T> t = read_ppm<T>(cfg.dataset_path() + "/" + files[i]);
        check(t.dim(1) == cfg.resolution,
              "dataset image resolution does not match config: " + files[i]);
        std::memcpy(out.ptr() + (int64_t)i * img, t.ptr(), sizeof(T) * img);
    }
    return out;
}

template <typename T>
void run_train_gan(const ExperimentConfig& cfg, bool resume) {
    auto images = load_dataset_images<T>(cfg);
    stylegen::StyleGenWorld<T> world(cfg);
    Checkpoint prev;
    const Checkpoint* resume_ptr = nullptr;
    if (resume && std::filesystem::exists(gan_ckpt(cfg))) {
        prev = Checkpoint::load(gan_ckpt(cfg), cfg.phase1_fingerprint());
        resume_ptr = &prev;
    }
    archive_config(cfg, "train-gan");
    stylegen::train_toy_gan(world, std::move(images), gan_ckpt(cfg),
                            cfg.report_path() + "/gan_loss.csv", cfg.iters_gan, resume_ptr);
}

template <typename T>
void run_train_encoder(const ExperimentConfig& cfg, bool resume) {
    auto p = load_phase1<T>(cfg, /*need_encoder=*/false);
    Checkpoint prev;
    const Checkpoint* resume_ptr = nullptr;
    if (resume && std::filesystem::exists(encoder_ckpt(cfg))) {
        prev = Checkpoint::load(encoder_ckpt(cfg), cfg.phase1_fingerprint());
        resume_ptr = &prev;
    }
    archive_config(cfg, "train-encoder");
    inversion::train_encoder(*p.inv, encoder_ckpt(cfg),
                             cfg.report_path() + "/encoder_loss.csv", cfg.iters_encoder,
                             resume_ptr);
}

// Fits one latent direction per attribute (training attributes plus the
// held-out evaluation attribute). Rather than regressing oracle readings on
// the latents themselves — which finds a *decoding* direction that need not
// move the generator's output — each pair is a latent perturbation and the
// oracle response it causes: regressing response on perturbation estimates
// the mean generative gradient, a direction with a causal effect.
template <typename T>
void run_fit_direction(const ExperimentConfig& cfg) {
    auto p = load_phase1<T>(cfg, /*need_encoder=*/false);
    std::vector<std::string> attrs = split_csv(cfg.train_attrs);
    attrs.push_back(cfg.eval_attr);
    Rng rng(cfg.seed ^ 0xd1cULL);
    NoGradGuard ng;
    const double sigma = 0.5;  // perturbation scale, well inside the latent spread

    // one shared pool of (perturbation, attribute responses) for all attributes
    std::vector<Tensor<double>> deltas;
    std::vector<toyworld::AttrEstimate> est_plus, est_minus;
    int attempts = 0;
    const int max_attempts = 50 * cfg.dir_fit_samples;
    while ((int)deltas.size() < cfg.dir_fit_samples) {
        if ((attempts += cfg.batch) > max_attempts)
            throw stylegen::NumericError(
                "fit-direction: attribute oracle rejected nearly all generated "
                "samples; the generator has not converged");
        const int b = cfg.batch;
        Var<T> z = Var<T>::constant(rng.template normal<T>({b, cfg.d_z}));
        Tensor<T> w = p.gan->map_latent(z).value();
        Tensor<T> dw = rng.template normal<T>({b, cfg.d_w}, (T)sigma);
        Tensor<T> w_plus = w.clone(), w_minus = w.clone();
        for (int64_t j = 0; j < w.numel(); ++j) {
            w_plus[j] += dw[j];
            w_minus[j] -= dw[j];
        }
        Tensor<T> x_plus = p.gan->synthesize(Var<T>::constant(w_plus)).value();
        Tensor<T> x_minus = p.gan->synthesize(Var<T>::constant(w_minus)).value();
        for (int i = 0; i < b && (int)deltas.size() < cfg.dir_fit_samples; ++i) {
            try {
                auto ep = toyworld::estimate_attributes(metrics_image(x_plus, i));
                auto em = toyworld::estimate_attributes(metrics_image(x_minus, i));
                Tensor<double> dv({cfg.d_w});
                for (int j = 0; j < cfg.d_w; ++j)
                    dv[j] = (double)dw[(int64_t)i * cfg.d_w + j];
                deltas.push_back(dv);
                est_plus.push_back(ep);
                est_minus.push_back(em);
            } catch (const toyworld::NoShapeError&) {
                // oracle could not read one side of this pair; skip it
            }
        }
    }
    archive_config(cfg, "fit-direction");
    for (const auto& attr : attrs) {
        std::vector<std::pair<Tensor<double>, double>> pairs;
        for (size_t i = 0; i < deltas.size(); ++i)
            pairs.emplace_back(deltas[i],
                               0.5 * (metrics::attr_value(est_plus[i], attr) -
                                      metrics::attr_value(est_minus[i], attr)));
        auto dir = inversion::fit_direction(attr, pairs);
        dir.save(direction_file(cfg, attr));
    }
}

template <typename T>
void run_train_rectifier(const ExperimentConfig& cfg, bool resume) {
    auto p = load_phase1<T>(cfg, /*need_encoder=*/true);
    std::vector<inversion::EditDirection> dirs;
    for (const auto& attr : split_csv(cfg.train_attrs)) dirs.push_back(load_direction(cfg, attr));

    Rng pool_rng(cfg.seed ^ 0x9001ULL);
    auto pool = training::generate_pool(*p.inv, dirs, cfg.quadruple_pool, pool_rng);
    rectifier::RectifierNet<T> net(cfg);
    Checkpoint prev;
    const Checkpoint* resume_ptr = nullptr;
    if (resume && std::filesystem::exists(rectifier_ckpt(cfg))) {
        prev = Checkpoint::load(rectifier_ckpt(cfg), cfg.fingerprint());
        resume_ptr = &prev;
    }
    archive_config(cfg, "train-rectifier");
    training::train_rectifier(net, std::move(pool), rectifier_ckpt(cfg),
                              cfg.report_path() + "/rectifier_loss.csv",
                              cfg.iters_rectifier, resume_ptr);
}

// ---------------------------------------------------------------------------
// Inference and evaluation.
// ---------------------------------------------------------------------------

// Held-out generated samples: a latent stream disjoint from every training
// stage's streams by construction of the salt.
template <typename T>
Tensor<T> holdout_images(const stylegen::StyleGenWorld<T>& gan, int n, uint64_t salt) {
    NoGradGuard ng;
    const ExperimentConfig& cfg = gan.cfg;
    Tensor<T> out({n, 3, cfg.resolution, cfg.resolution});
    Rng rng(cfg.seed ^ salt);
    const int64_t img = (int64_t)3 * cfg.resolution * cfg.resolution;
    for (int i = 0; i < n; i += cfg.batch) {
        const int b = std::min(cfg.batch, n - i);
        Var<T> z = Var<T>::constant(rng.template normal<T>({b, cfg.d_z}));
        Tensor<T> x = gan.synthesize(gan.map_latent(z)).value();
        std::memcpy(out.ptr() + (int64_t)i * img, x.ptr(), sizeof(T) * b * img);
    }
    return out;
}

constexpr uint64_t kHoldoutSalt = 0xe7a1ULL;

// Per-sample reconstruction measurements for the inversion-only baseline and
// the rectified output, over a batch of held-out images.
template <typename T>
struct ReconSamples {
    std::vector<double> l2_inv, l2_rect, ssim_inv, ssim_rect, perc_inv, perc_rect;
};

template <typename T>
ReconSamples<T> recon_samples(const inversion::InversionWorld<T>& inv,
                              const rectifier::RectifierNet<T>& net, const Tensor<T>& xs) {
    NoGradGuard ng;
    ReconSamples<T> out;
    const int n = xs.dim(0);
    const int64_t img = (int64_t)xs.dim(1) * xs.dim(2) * xs.dim(3);
    for (int i = 0; i < n; ++i) {
        Tensor<T> x({1, xs.dim(1), xs.dim(2), xs.dim(3)});
        std::memcpy(x.ptr(), xs.ptr() + (int64_t)i * img, sizeof(T) * img);
        Tensor<T> xhat = inv.invert(Var<T>::constant(x)).value();
        Tensor<T> dx = x.clone();
        for (int64_t j = 0; j < img; ++j) dx[j] -= xhat[j];
        Tensor<T> sec = net.cfg.input_mode == "raw_original"
                            ? x
                            : (net.cfg.input_mode == "raw_inversion" ? xhat : dx);
        Tensor<T> xr =
            net.rectify(Var<T>::constant(xhat), Var<T>::constant(sec)).value();

        Tensor<double> X = metrics_image(x, 0), Xh = metrics_image(xhat, 0),
                       Xr = metrics_image(xr, 0);
        out.l2_inv.push_back(metrics::l2(Xh, X));
        out.l2_rect.push_back(metrics::l2(Xr, X));
        out.ssim_inv.push_back(metrics::ms_ssim(Xh, X));
        out.ssim_rect.push_back(metrics::ms_ssim(Xr, X));
        out.perc_inv.push_back(metrics::perceptual_distance(Xh, X));
        out.perc_rect.push_back(metrics::perceptual_distance(Xr, X));
    }
    return out;
}

struct RectifyOutcome {
    int written = 0, failed = 0;
};

// Runs inference on a list of image files; continues past unreadable inputs.
template <typename T>
RectifyOutcome run_rectify(const ExperimentConfig& cfg,
                           const std::vector<std::string>& files,
                           const std::string& attr, double alpha,
                           const std::string& out_dir) {
    auto p = load_phase1<T>(cfg, /*need_encoder=*/true);
    auto net = load_rectifier<T>(cfg);
    inversion::EditRequest req{load_direction(cfg, attr), alpha};
    std::filesystem::create_directories(out_dir);

    RectifyOutcome outcome;
    for (const auto& file : files) {
        Tensor<T> x0;
        try {
            x0 = read_ppm<T>(file);
            check(x0.dim(1) == cfg.resolution && x0.dim(2) == cfg.resolution,
                  "input resolution mismatch: " + file);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "skipping %s: %s\n", file.c_str(), e.what());
            ++outcome.failed;
            continue;
        }
        Tensor<T> batch = x0.view({1, 3, cfg.resolution, cfg.resolution});
        auto r = training::infer(*p.inv, *net, batch, req);
        const std::string stem =
            out_dir + "/" + std::filesystem::path(file).stem().string();
        write_ppm(stem + "_inversion.ppm", metrics_image(r.Xhat, 0));
        write_ppm(stem + "_edited.ppm", metrics_image(r.Yhat, 0));
        write_ppm(stem + "_rectified.ppm", metrics_image(r.X_r, 0));
        write_ppm(stem + "_rectified_edit.ppm", metrics_image(r.Y_r, 0));
        // original | inversion | rectified | edited | rectified-edit
        auto grid = image_grid<double>({metrics_image(batch, 0), metrics_image(r.Xhat, 0),
                                        metrics_image(r.X_r, 0), metrics_image(r.Yhat, 0),
                                        metrics_image(r.Y_r, 0)});
        write_ppm(stem + "_grid.ppm", grid);
        ++outcome.written;
    }
    return outcome;
}

// Full Table-style evaluation: reconstruction CSV (baseline row always
// included), attribute-response CSV for the held-out attribute, and a few
// comparison grids.
template <typename T>
void run_evaluate(const ExperimentConfig& cfg) {
    auto p = load_phase1<T>(cfg, /*need_encoder=*/true);
    auto net = load_rectifier<T>(cfg);
    inversion::EditDirection eval_dir = load_direction(cfg, cfg.eval_attr);

    Tensor<T> xs = holdout_images(*p.gan, cfg.eval_samples, kHoldoutSalt);
    auto rs = recon_samples(*p.inv, *net, xs);

    // timing at batch 1, median over 20 runs of each path
    Tensor<T> x1({1, 3, cfg.resolution, cfg.resolution});
    std::memcpy(x1.ptr(), xs.ptr(), sizeof(T) * x1.numel());
    NoGradGuard ng;
    const double t_inv = metrics::timing_ms(
        [&] { (void)p.inv->invert(Var<T>::constant(x1)).value(); }, 20);
    const double t_rect = metrics::timing_ms(
        [&] {
            Tensor<T> xhat = p.inv->invert(Var<T>::constant(x1)).value();
            Tensor<T> dx = x1.clone();
            for (int64_t j = 0; j < dx.numel(); ++j) dx[j] -= xhat[j];
            (void)net->rectify(Var<T>::constant(xhat), Var<T>::constant(dx)).value();
        },
        20);

    std::vector<metrics::ReconReport> recon = {
        {"inversion-only", metrics::median(rs.l2_inv), metrics::median(rs.perc_inv),
         metrics::median(rs.ssim_inv), t_inv},
        {"rectified", metrics::median(rs.l2_rect), metrics::median(rs.perc_rect),
         metrics::median(rs.ssim_rect), t_rect},
    };
    metrics::write_recon_csv(cfg.report_path() + "/recon.csv", recon);

    // attribute response of the edit pathway, before and after rectification
    Tensor<T> exs = holdout_images(*p.gan, cfg.edit_eval_samples, kHoldoutSalt ^ 0xa11ULL);
    std::vector<Tensor<double>> inputs;
    for (int i = 0; i < exs.dim(0); ++i) inputs.push_back(metrics_image(exs, i));
    const std::vector<double> grid = {-2.0, -1.0, 0.0, 1.0, 2.0};

    auto edited_only = [&](const Tensor<double>& x0, double alpha) {
        Tensor<T> xb = x0.template cast<T>().view({1, 3, cfg.resolution, cfg.resolution});
        Tensor<T> w = p.inv->embed(Var<T>::constant(xb)).value();
        Tensor<T> we = inversion::edit_latent(w, {eval_dir, alpha});
        return metrics_image(p.gan->synthesize(Var<T>::constant(we)).value(), 0);
    };
    auto rectified_edit = [&](const Tensor<double>& x0, double alpha) {
        Tensor<T> xb = x0.template cast<T>().view({1, 3, cfg.resolution, cfg.resolution});
        auto r = training::infer(*p.inv, *net, xb, {eval_dir, alpha});
        return metrics_image(r.Y_r, 0);
    };
    auto rep_inv =
        metrics::attribute_response(edited_only, cfg.eval_attr, grid, inputs);
    auto rep_rect =
        metrics::attribute_response(rectified_edit, cfg.eval_attr, grid, inputs);
    rep_inv.attribute = "edited:" + cfg.eval_attr;
    rep_rect.attribute = "rectified-edit:" + cfg.eval_attr;
    metrics::write_edit_csv(cfg.report_path() + "/edit.csv", {rep_inv, rep_rect});

    // comparison grids for the first few held-out samples
    for (int i = 0; i < std::min(4, xs.dim(0)); ++i) {
        Tensor<T> xb({1, 3, cfg.resolution, cfg.resolution});
        std::memcpy(xb.ptr(), xs.ptr() + (int64_t)i * xb.numel(), sizeof(T) * xb.numel());
        auto r = training::infer(*p.inv, *net, xb, {eval_dir, 1.0});
        auto g = image_grid<double>({metrics_image(xb, 0), metrics_image(r.Xhat, 0),
                                     metrics_image(r.X_r, 0), metrics_image(r.Yhat, 0),
                                     metrics_image(r.Y_r, 0)});
        write_ppm(cfg.report_path() + "/grids/sample_" + std::to_string(i) + ".ppm", g);
    }
}

// Condenses the CSV reports into one human-readable summary.
inline void run_report(const ExperimentConfig& cfg) {
    const std::string recon = cfg.report_path() + "/recon.csv";
    const std::string edit = cfg.report_path() + "/edit.csv";
    require_artifact(recon, "evaluate");
    std::ofstream out(cfg.report_path() + "/summary.md");
    check(out.good(), "cannot write summary");
    out << "# Evaluation summary\n\n";
    out << "Reconstruction metrics are medians over " << cfg.eval_samples
        << " held-out generated samples. The identity measure used during\n"
           "development is an embedding-encoder cosine proxy, not a trained "
           "identity network.\n\n## Reconstruction\n\n```\n";
    std::ifstream rf(recon);
    std::string line;
    while (std::getline(rf, line)) out << line << "\n";
    out << "```\n";
    if (std::filesystem::exists(edit)) {
        out << "\n## Attribute response (held-out attribute: " << cfg.eval_attr
            << ")\n\n```\n";
        std::ifstream ef(edit);
        while (std::getline(ef, line)) out << line << "\n";
        out << "```\n";
    }
}

}  // namespace reganie::pipeline
