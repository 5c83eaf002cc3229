// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "reganie/core/tensor.hpp"

namespace reganie {

// Experiment configuration: one flat human-readable key=value file, with
// command-line overrides. The canonical serialization is hashed into a
// fingerprint that every checkpoint embeds.
struct ExperimentConfig {
    // geometry
    int resolution = 64;
    int d_z = 64;
    int d_w = 64;
    int c_sp = 16;
    int max_channels = 48;
    int enc_fmap_base = 384;   // backbone channels at res r: min(max_channels, base/r)
    int gen_fmap_base = 384;   // generator channels, same rule
    int mapping_layers = 3;

    // losses / regularization
    double lambda_l1 = 1.0;
    double lambda_lpips = 1.0;
    double lambda_gan = 1.0;
    double r1_gamma = 1.0;

    // optimizer
    double lr = 0.002;
    double adam_b1 = 0.0;
    double adam_b2 = 0.99;

    // schedule
    int iters_gan = 10000;
    int iters_encoder = 5000;
    int iters_rectifier = 20000;
    int batch = 8;
    int snapshot_every = 2000;
    uint64_t seed = 1;

    // data
    int dataset_n = 2000;
    int quadruple_pool = 1024;
    int dir_fit_samples = 400;
    int eval_samples = 64;
    int edit_eval_samples = 100;

    // rectifier ablation switches
    bool enable_spatial = true;
    bool enable_global = true;
    std::string input_mode = "delta";  // delta | raw_original | raw_inversion
    bool share_backbone = false;

    // edit directions: attributes used to train the rectifier; eval_attr is
    // held out for evaluation
    std::string train_attrs = "cx,cy";
    std::string eval_attr = "size";
    double edit_alpha_max = 2.0;

    // paths (resolved against REGANIE_HOME when relative)
    std::string workspace = "";
    std::string dataset_dir = "dataset";
    std::string ckpt_dir = "checkpoints";
    std::string report_dir = "reports";

    int d_gl() const { return 4 * max_channels; }

    int channels_at(int res, int fmap_base) const {
        int c = fmap_base / res;
        if (c < 4) c = 4;
        if (c > max_channels) c = max_channels;
        return c;
    }
    int enc_channels_at(int res) const { return channels_at(res, enc_fmap_base); }
    int gen_channels_at(int res) const { return channels_at(res, gen_fmap_base); }

    // The configuration matching the architecture table at full scale.
    static ExperimentConfig paper_scale() {
        ExperimentConfig c;
        c.resolution = 512;
        c.d_z = 512;
        c.d_w = 512;
        c.max_channels = 512;
        c.enc_fmap_base = 16384;
        c.gen_fmap_base = 65536;
        c.iters_rectifier = 100000;
        return c;
    }

    std::map<std::string, std::string> to_map() const {
        std::map<std::string, std::string> m;
        auto put = [&](const std::string& k, auto v) {
            std::ostringstream os;
            os << v;
            m[k] = os.str();
        };
        put("resolution", resolution);
        put("d_z", d_z);
        put("d_w", d_w);
        put("c_sp", c_sp);
        put("max_channels", max_channels);
        put("enc_fmap_base", enc_fmap_base);
        put("gen_fmap_base", gen_fmap_base);
        put("mapping_layers", mapping_layers);
        put("lambda_l1", lambda_l1);
        put("lambda_lpips", lambda_lpips);
        put("lambda_gan", lambda_gan);
        put("r1_gamma", r1_gamma);
        put("lr", lr);
        put("adam_b1", adam_b1);
        put("adam_b2", adam_b2);
        put("iters_gan", iters_gan);
        put("iters_encoder", iters_encoder);
        put("iters_rectifier", iters_rectifier);
        put("batch", batch);
        put("snapshot_every", snapshot_every);
        put("seed", seed);
        put("dataset_n", dataset_n);
        put("quadruple_pool", quadruple_pool);
        put("dir_fit_samples", dir_fit_samples);
        put("eval_samples", eval_samples);
        put("edit_eval_samples", edit_eval_samples);
        put("enable_spatial", enable_spatial ? 1 : 0);
        put("enable_global", enable_global ? 1 : 0);
        put("input_mode", input_mode);
        put("share_backbone", share_backbone ? 1 : 0);
        put("train_attrs", train_attrs);
        put("eval_attr", eval_attr);
        put("edit_alpha_max", edit_alpha_max);
        put("workspace", workspace);
        put("dataset_dir", dataset_dir);
        put("ckpt_dir", ckpt_dir);
        put("report_dir", report_dir);
        return m;
    }

    void set(const std::string& key, const std::string& val) {
        auto as_int = [&] { return std::stoi(val); };
        auto as_u64 = [&] { return (uint64_t)std::stoull(val); };
        auto as_dbl = [&] { return std::stod(val); };
        auto as_bool = [&] { return val == "1" || val == "true" || val == "on"; };
        if (key == "resolution") resolution = as_int();
        else if (key == "d_z") d_z = as_int();
        else if (key == "d_w") d_w = as_int();
        else if (key == "c_sp") c_sp = as_int();
        else if (key == "max_channels") max_channels = as_int();
        else if (key == "enc_fmap_base") enc_fmap_base = as_int();
        else if (key == "gen_fmap_base") gen_fmap_base = as_int();
        else if (key == "mapping_layers") mapping_layers = as_int();
        else if (key == "lambda_l1") lambda_l1 = as_dbl();
        else if (key == "lambda_lpips") lambda_lpips = as_dbl();
        else if (key == "lambda_gan") lambda_gan = as_dbl();
        else if (key == "r1_gamma") r1_gamma = as_dbl();
        else if (key == "lr") lr = as_dbl();
        else if (key == "adam_b1") adam_b1 = as_dbl();
        else if (key == "adam_b2") adam_b2 = as_dbl();
        else if (key == "iters_gan") iters_gan = as_int();
        else if (key == "iters_encoder") iters_encoder = as_int();
        else if (key == "iters_rectifier") iters_rectifier = as_int();
        else if (key == "batch") batch = as_int();
        else if (key == "snapshot_every") snapshot_every = as_int();
        else if (key == "seed") seed = as_u64();
        else if (key == "dataset_n") dataset_n = as_int();
        else if (key == "quadruple_pool") quadruple_pool = as_int();
        else if (key == "dir_fit_samples") dir_fit_samples = as_int();
        else if (key == "eval_samples") eval_samples = as_int();
        else if (key == "edit_eval_samples") edit_eval_samples = as_int();
        else if (key == "enable_spatial") enable_spatial = as_bool();
        else if (key == "enable_global") enable_global = as_bool();
        else if (key == "input_mode") input_mode = val;
        else if (key == "share_backbone") share_backbone = as_bool();
        else if (key == "train_attrs") train_attrs = val;
        else if (key == "eval_attr") eval_attr = val;
        else if (key == "edit_alpha_max") edit_alpha_max = as_dbl();
        else if (key == "workspace") workspace = val;
        else if (key == "dataset_dir") dataset_dir = val;
        else if (key == "ckpt_dir") ckpt_dir = val;
        else if (key == "report_dir") report_dir = val;
        else throw TensorError("unknown config key: " + key);
    }

    std::string serialize() const {
        std::ostringstream os;
        for (const auto& kv : to_map()) os << kv.first << "=" << kv.second << "\n";
        return os.str();
    }

    // FNV-1a over the canonical serialization, excluding path keys (a relocated
    // workspace still matches its checkpoints) and schedule-length keys (a run
    // may be resumed with a longer schedule or different snapshot cadence).
    uint64_t fingerprint() const { return fingerprint_impl(false); }

    // Fingerprint for generator/encoder checkpoints: additionally ignores keys
    // that only affect the rectifier stage, so one first-phase run can back
    // several rectifier variants.
    uint64_t phase1_fingerprint() const { return fingerprint_impl(true); }

    uint64_t fingerprint_impl(bool phase1_only) const {
        static const std::set<std::string> always_skip = {
            "workspace",  "dataset_dir",   "ckpt_dir",        "report_dir",
            "iters_gan",  "iters_encoder", "iters_rectifier", "snapshot_every"};
        static const std::set<std::string> rectifier_only = {
            "c_sp",           "enable_spatial",  "enable_global",
            "input_mode",     "share_backbone",  "quadruple_pool",
            "edit_alpha_max", "train_attrs",     "eval_attr",
            "dir_fit_samples", "eval_samples",   "edit_eval_samples"};
        uint64_t h = 1469598103934665603ULL;
        for (const auto& kv : to_map()) {
            if (always_skip.count(kv.first)) continue;
            if (phase1_only && rectifier_only.count(kv.first)) continue;
            for (char c : kv.first + "=" + kv.second + ";")
                h = (h ^ (uint64_t)(uint8_t)c) * 1099511628211ULL;
        }
        return h;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream f(path);
        check(f.good(), "cannot open config file: " + path);
        ExperimentConfig c;
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            size_t h = line.find('#');
            if (h != std::string::npos) line = line.substr(0, h);
            size_t a = line.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            size_t b = line.find_last_not_of(" \t\r");
            line = line.substr(a, b - a + 1);
            size_t eq = line.find('=');
            check(eq != std::string::npos,
                  "config parse error at line " + std::to_string(lineno) + ": " + line);
            c.set(line.substr(0, eq), line.substr(eq + 1));
        }
        return c;
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        check(f.good(), "cannot write config file: " + path);
        f << serialize();
    }

    std::string root() const {
        if (!workspace.empty()) return workspace;
        const char* env = std::getenv("REGANIE_HOME");
        return env ? std::string(env) : std::string("workspace");
    }

    std::string resolve(const std::string& p) const {
        if (!p.empty() && p[0] == '/') return p;
        return root() + "/" + p;
    }

    std::string dataset_path() const { return resolve(dataset_dir); }
    std::string ckpt_path() const { return resolve(ckpt_dir); }
    std::string report_path() const { return resolve(report_dir); }
};

}  // namespace reganie
