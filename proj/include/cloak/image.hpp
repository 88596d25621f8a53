#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "cloak/errors.hpp"

namespace cloak {

// Dense H x W x C grid of doubles, row-major with interleaved channels.
// Scene images and patterns use C=3 in [0,1]; masks use C=1 in {0,1}.
struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    bool empty() const { return data.empty(); }
    size_t size() const { return data.size(); }

    double& at(int y, int x, int ch) {
        assert(y >= 0 && y < h && x >= 0 && x < w && ch >= 0 && ch < c);
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    double at(int y, int x, int ch) const {
        assert(y >= 0 && y < h && x >= 0 && x < w && ch >= 0 && ch < c);
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }

    bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

// Binary mask aligned with a scene image: values are exactly 0 or 1.
using MaskImage = Image;

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": shapes differ");
    }
}

}  // namespace cloak
