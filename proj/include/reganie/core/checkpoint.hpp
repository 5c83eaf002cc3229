// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "reganie/core/config.hpp"
#include "reganie/core/rng.hpp"
#include "reganie/nn/modules.hpp"

namespace reganie {

// Single-file binary checkpoint: format version, config fingerprint, iteration
// counter, metadata strings, then named f64 arrays (parameters and optimizer
// moments, converted from the working scalar type on save). The loader
// rejects fingerprint mismatches.
class Checkpoint {
public:
    static constexpr char kMagic[8] = {'R', 'G', 'N', 'C', 'K', 'P', 'T', '1'};

    uint64_t fingerprint = 0;
    int64_t iteration = 0;
    std::map<std::string, std::string> meta;
    std::map<std::string, Tensor<double>> arrays;

    template <typename T>
    void put_params(const std::string& prefix, const ParamStore<T>& ps) {
        for (const auto& kv : ps.params())
            arrays[prefix + "/p/" + kv.first] = kv.second.value().template cast<double>();
    }

    template <typename T>
    void put_adam(const std::string& prefix, Adam<T>& opt) {
        for (auto& kv : opt.moment1())
            arrays[prefix + "/m1/" + kv.first] = kv.second.template cast<double>();
        for (auto& kv : opt.moment2())
            arrays[prefix + "/m2/" + kv.first] = kv.second.template cast<double>();
        meta[prefix + "/adam_t"] = std::to_string(opt.iterations());
    }

    void put_rng(const std::string& key, const Rng& rng) {
        auto st = rng.state();
        meta[key] = std::to_string(st.s) + " " + (st.has_spare ? "1" : "0") + " " +
                    std::to_string(st.spare);
    }

    Rng get_rng(const std::string& key) const {
        auto it = meta.find(key);
        check(it != meta.end(), "checkpoint: no rng state under " + key);
        Rng::State st{};
        char flag;
        std::istringstream is(it->second);
        is >> st.s >> flag >> st.spare;
        st.has_spare = flag == '1';
        Rng r;
        r.set_state(st);
        return r;
    }

    template <typename T>
    void load_params(const std::string& prefix, ParamStore<T>& ps) const {
        for (auto& kv : ps.params()) {
            auto it = arrays.find(prefix + "/p/" + kv.first);
            check(it != arrays.end(), "checkpoint: missing parameter " + kv.first);
            check(it->second.shape() == kv.second.shape(),
                  "checkpoint: shape mismatch for " + kv.first);
            Tensor<T> t = it->second.template cast<T>();
            std::memcpy(kv.second.value().ptr(), t.ptr(),
                        sizeof(T) * t.numel());
        }
    }

    template <typename T>
    void load_adam(const std::string& prefix, Adam<T>& opt) const {
        auto load_into = [&](const std::string& kind, std::map<std::string, Tensor<T>>& dst) {
            for (auto& kv : dst) {
                auto it = arrays.find(prefix + "/" + kind + "/" + kv.first);
                check(it != arrays.end(), "checkpoint: missing moment " + kv.first);
                Tensor<T> t = it->second.template cast<T>();
                std::memcpy(kv.second.ptr(), t.ptr(), sizeof(T) * t.numel());
            }
        };
        load_into("m1", opt.moment1());
        load_into("m2", opt.moment2());
        auto it = meta.find(prefix + "/adam_t");
        check(it != meta.end(), "checkpoint: missing adam step counter");
        opt.set_iterations(std::stoll(it->second));
    }

    void save(const std::string& path) const {
        std::filesystem::create_directories(std::filesystem::path(path).parent_path());
        std::ofstream f(path, std::ios::binary);
        check(f.good(), "cannot write checkpoint: " + path);
        f.write(kMagic, 8);
        write_u64(f, fingerprint);
        write_u64(f, (uint64_t)iteration);
        write_u64(f, meta.size());
        for (const auto& kv : meta) {
            write_str(f, kv.first);
            write_str(f, kv.second);
        }
        write_u64(f, arrays.size());
        for (const auto& kv : arrays) {
            write_str(f, kv.first);
            const auto& s = kv.second.shape();
            write_u64(f, s.size());
            for (int d : s) write_u64(f, (uint64_t)d);
            f.write((const char*)kv.second.ptr(), sizeof(double) * kv.second.numel());
        }
        check(f.good(), "short write saving checkpoint: " + path);
    }

    static Checkpoint load(const std::string& path, uint64_t expected_fingerprint = 0) {
        std::ifstream f(path, std::ios::binary);
        check(f.good(), "cannot open checkpoint: " + path);
        char magic[8];
        f.read(magic, 8);
        check(f.good() && std::memcmp(magic, kMagic, 8) == 0,
              "not a checkpoint file: " + path);
        Checkpoint c;
        c.fingerprint = read_u64(f);
        if (expected_fingerprint != 0)
            check(c.fingerprint == expected_fingerprint,
                  "checkpoint config fingerprint mismatch for " + path);
        c.iteration = (int64_t)read_u64(f);
        uint64_t nmeta = read_u64(f);
        for (uint64_t i = 0; i < nmeta; ++i) {
            std::string k = read_str(f);
            c.meta[k] = read_str(f);
        }
        uint64_t narr = read_u64(f);
        for (uint64_t i = 0; i < narr; ++i) {
            std::string k = read_str(f);
            uint64_t nd = read_u64(f);
            Shape s((size_t)nd);
            for (auto& d : s) d = (int)read_u64(f);
            Tensor<double> t(s);
            f.read((char*)t.ptr(), sizeof(double) * t.numel());
            c.arrays[k] = std::move(t);
        }
        check(f.good(), "truncated checkpoint: " + path);
        return c;
    }

private:
    static void write_u64(std::ostream& f, uint64_t v) { f.write((const char*)&v, 8); }
    static uint64_t read_u64(std::istream& f) {
        uint64_t v = 0;
        f.read((char*)&v, 8);
        return v;
    }
    static void write_str(std::ostream& f, const std::string& s) {
        write_u64(f, s.size());
        f.write(s.data(), (std::streamsize)s.size());
    }
    static std::string read_str(std::istream& f) {
        uint64_t n = read_u64(f);
        std::string s(n, '\0');
        f.read(s.data(), (std::streamsize)n);
        return s;
    }
};

}  // namespace reganie
