// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "reganie/core/tensor.hpp"

namespace reganie {

// Deterministic generator: splitmix64 stream with a hand-rolled Box-Muller
// normal, so the byte-exact sequence does not depend on the standard library
// implementation.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    template <typename T>
    Tensor<T> normal(const Shape& s, double stddev = 1.0, double mean = 0.0) {
        Tensor<T> t(s);
        T* p = t.ptr();
        for (int64_t i = 0; i < t.numel(); ++i) p[i] = (T)(mean + stddev * gauss());
        return t;
    }

    // Derives an independent stream, e.g. per training stage or per worker.
    Rng fork(uint64_t salt) {
        Rng r(next_u64() ^ (salt * 0x2545F4914F6CDD1DULL));
        return r;
    }

    struct State {
        uint64_t s;
        bool has_spare;
        double spare;
    };
    State state() const { return {state_, has_spare_, spare_}; }
    void set_state(const State& st) {
        state_ = st.s;
        has_spare_ = st.has_spare;
        spare_ = st.spare;
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace reganie
