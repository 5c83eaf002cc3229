// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "reganie/core/tensor.hpp"

namespace reganie {

// Images live as [C,H,W] (or batched [N,C,H,W]) tensors in [-1,1]. The 8-bit
// conversion happens only here, at file I/O. Files are binary PPM (P6),
// which is lossless 8-bit RGB.

inline uint8_t to_u8(double v) {
    double t = (v + 1.0) * 0.5 * 255.0 + 0.5;
    if (t < 0) t = 0;
    if (t > 255) t = 255;
    return (uint8_t)t;
}

inline double from_u8(uint8_t b) { return (double)b / 255.0 * 2.0 - 1.0; }

template <typename T>
void write_ppm(const std::string& path, const Tensor<T>& img) {
    check(img.ndim() == 3 && img.dim(0) == 3, "write_ppm: need [3,H,W], got " + shape_str(img.shape()));
    const int H = img.dim(1), W = img.dim(2);
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "cannot write image: " + path);
    f << "P6\n" << W << " " << H << "\n255\n";
    std::vector<uint8_t> row(3 * (size_t)W);
    const T* p = img.ptr();
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < 3; ++c)
                row[3 * (size_t)w + c] = to_u8((double)p[((int64_t)c * H + h) * W + w]);
        f.write((const char*)row.data(), (std::streamsize)row.size());
    }
    check(f.good(), "short write: " + path);
}

template <typename T>
Tensor<T> read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "cannot open image: " + path);
    std::string magic;
    int W = 0, H = 0, maxval = 0;
    f >> magic >> W >> H >> maxval;
    check(magic == "P6" && maxval == 255 && W > 0 && H > 0, "unsupported PPM: " + path);
    f.get();  // single whitespace after header
    Tensor<T> img({3, H, W});
    std::vector<uint8_t> row(3 * (size_t)W);
    T* p = img.ptr();
    for (int h = 0; h < H; ++h) {
        f.read((char*)row.data(), (std::streamsize)row.size());
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < 3; ++c)
                p[((int64_t)c * H + h) * W + w] = (T)from_u8(row[3 * (size_t)w + c]);
    }
    check(f.good(), "truncated PPM: " + path);
    return img;
}

// Side-by-side comparison strip: images laid out left to right with a 2px
// separator, all sharing one resolution.
template <typename T>
Tensor<T> image_grid(const std::vector<Tensor<T>>& images) {
    check(!images.empty(), "image_grid: no images");
    const int H = images[0].dim(1), W = images[0].dim(2);
    const int sep = 2;
    const int n = (int)images.size();
    Tensor<T> out = Tensor<T>::full({3, H, n * W + (n - 1) * sep}, (T)1);
    const int outW = out.dim(2);
    for (int i = 0; i < n; ++i) {
        check(images[i].dim(1) == H && images[i].dim(2) == W, "image_grid: mixed resolutions");
        const int x0 = i * (W + sep);
        for (int c = 0; c < 3; ++c)
            for (int h = 0; h < H; ++h)
                std::memcpy(out.ptr() + ((int64_t)c * H + h) * outW + x0,
                            images[i].ptr() + ((int64_t)c * H + h) * W, sizeof(T) * W);
    }
    return out;
}

// Batched helpers: select sample i of [N,C,H,W] as a [C,H,W] view-copy.
template <typename T>
Tensor<T> nth_image(const Tensor<T>& batch, int i) {
    check(batch.ndim() == 4, "nth_image: need NCHW");
    const int64_t sz = (int64_t)batch.dim(1) * batch.dim(2) * batch.dim(3);
    Tensor<T> out({batch.dim(1), batch.dim(2), batch.dim(3)});
    std::memcpy(out.ptr(), batch.ptr() + (int64_t)i * sz, sizeof(T) * sz);
    return out;
}

}  // namespace reganie
