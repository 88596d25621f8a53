#pragma once

// Brute-force reference implementations used as test oracles. These stay
// deliberately independent of the production code paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "cloak/geometry.hpp"
#include "cloak/image.hpp"
#include "cloak/losses.hpp"
#include "cloak/rng.hpp"

namespace oracle {

using cloak::Image;
using cloak::MaskImage;
using cloak::Vec2;

// Per-pixel inverse-map + bilinear sample with zero fill outside the source.
inline Image warp_oracle(const Image& pattern, const cloak::Homography& h, int out_h, int out_w) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = h(r, c);
    }
    Eigen::Matrix3d inv = m.inverse();

    Image out(out_h, out_w, pattern.c, 0.0);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            Eigen::Vector3d p = inv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
            double sx = p(0) / p(2);
            double sy = p(1) / p(2);
            double u = sx - 0.5, v = sy - 0.5;
            int x0 = static_cast<int>(std::floor(u));
            int y0 = static_cast<int>(std::floor(v));
            double fx = u - x0, fy = v - y0;
            for (int ch = 0; ch < pattern.c; ++ch) {
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy) {
                    for (int dx = 0; dx <= 1; ++dx) {
                        int xx = x0 + dx, yy = y0 + dy;
                        if (xx < 0 || xx >= pattern.w || yy < 0 || yy >= pattern.h) continue;
                        double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
                        acc += w * pattern.at(yy, xx, ch);
                    }
                }
                out.at(y, x, ch) = acc;
            }
        }
    }
    return out;
}

// Even-odd crossing test written independently of the production rasterizer.
inline bool point_in_polygon(double px, double py, const std::vector<Vec2>& v) {
    int crossings = 0;
    size_t n = v.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % n];
        if ((a.y <= py && b.y > py) || (b.y <= py && a.y > py)) {
            double t = (py - a.y) / (b.y - a.y);
            if (px < a.x + t * (b.x - a.x)) ++crossings;
        }
    }
    return (crossings % 2) == 1;
}

inline MaskImage mask_oracle(const std::vector<Vec2>& poly, int h, int w) {
    MaskImage m(h, w, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (point_in_polygon(x + 0.5, y + 0.5, poly)) m.at(y, x, 0) = 1.0;
        }
    }
    return m;
}

inline double tv_oracle(const Image& img) {
    double total = 0.0;
    for (int c = 0; c < img.c; ++c) {
        for (int i = 0; i < img.h; ++i) {
            for (int j = 0; j < img.w; ++j) {
                double down = 0.0, right = 0.0;
                if (i + 1 < img.h) down = img.at(i, j, c) - img.at(i + 1, j, c);
                if (j + 1 < img.w) right = img.at(i, j, c) - img.at(i, j + 1, c);
                total += std::sqrt(down * down + right * right);
            }
        }
    }
    return total;
}

inline double nps_oracle(const Image& img, const cloak::Palette& palette) {
    double total = 0.0;
    for (int i = 0; i < img.h; ++i) {
        for (int j = 0; j < img.w; ++j) {
            double best = 1e300;
            for (const auto& c : palette) {
                double d = 0.0;
                for (int ch = 0; ch < 3; ++ch) d += std::abs(img.at(i, j, ch) - c[static_cast<size_t>(ch)]);
                if (d < best) best = d;
            }
            total += best;
        }
    }
    return total;
}

// --- gradient checking ----------------------------------------------------------

inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double step = 1e-4) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double orig = x[i];
        x[i] = orig + step;
        double fp = f(x);
        x[i] = orig - step;
        double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

// ||a-b|| / (||a|| + ||b||), the usual symmetric relative error.
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        da += a[i] * a[i];
        db += b[i] * b[i];
    }
    double denom = std::sqrt(da) + std::sqrt(db);
    if (denom < 1e-12) return std::sqrt(num);
    return std::sqrt(num) / denom;
}

inline Image random_image(cloak::Rng& rng, int h, int w, int c) {
    Image img(h, w, c);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

}  // namespace oracle
