// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "reganie/core/ops.hpp"
#include "reganie/core/rng.hpp"

namespace reganie {

// Fixed random-feature perceptual distance: a frozen bank of seeded random
// 3x3 filters applied at three dyadic scales, with mean squared error between
// the resulting feature stacks. A lightweight, deterministic stand-in for a
// pretrained perceptual network; differentiable through both arguments.
template <typename T>
class PerceptualProxy {
public:
    explicit PerceptualProxy(int channels_in = 3, int features = 12, uint64_t seed = 97) {
        Rng rng(seed);
        filt_ = Var<T>::constant(
            rng.template normal<T>({features, channels_in, 3, 3},
                                   std::sqrt(2.0 / (channels_in * 9.0))));
    }

    Var<T> features(const Var<T>& img) const {
        return leaky_relu(conv2d(img, filt_, Var<T>(), 1, 1));
    }

    // Scalar distance, averaged over the three scales.
    Var<T> operator()(const Var<T>& a, const Var<T>& b) const {
        check(a.value().shape() == b.value().shape(),
              "perceptual: shape mismatch " + shape_str(a.shape()) + " vs " +
                  shape_str(b.shape()));
        Var<T> pa = a, pb = b;
        Var<T> total;
        for (int s = 0; s < 3; ++s) {
            Var<T> d = mean_all(square(sub(features(pa), features(pb))));
            total = (s == 0) ? d : add(total, d);
            if (s < 2 && pa.value().dim(2) >= 8) {
                pa = avgpool2(pa);
                pb = avgpool2(pb);
            }
        }
        return scale(total, 1.0 / 3.0);
    }

private:
    Var<T> filt_;
};

}  // namespace reganie
