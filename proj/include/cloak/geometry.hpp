#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cloak/image.hpp"

namespace cloak {

// Continuous image coordinates: pixel (x=col, y=row) samples at (x+0.5, y+0.5).
// Polygon vertices and quad corners live in this continuous space, so a quad
// (0,0)-(W,0)-(W,H)-(0,H) spans a full W x H grid.

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, const Vec2& a) { return {s * a.x, s * a.y}; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

// Four ordered corners: top-left, top-right, bottom-right, bottom-left.
struct Quad {
    std::array<Vec2, 4> points;

    // Corner quad of a size x size pattern (or any w x h grid).
    static Quad from_extent(double w, double h) {
        return Quad{{Vec2{0, 0}, Vec2{w, 0}, Vec2{w, h}, Vec2{0, h}}};
    }
};

// No three corners collinear and the polygon is simple.
bool quad_is_valid(const Quad& q);
void validate_quad(const Quad& q, const char* what);  // throws DegenerateQuad

// 3x3 perspective transform, column-vector convention: [x' y' w']^T = m [x y 1]^T,
// then x = x'/w', y = y'/w'. Normalized so m[2][2] == 1.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[static_cast<size_t>(r) * 3 + c]; }
    double& operator()(int r, int c) { return m[static_cast<size_t>(r) * 3 + c]; }

    Vec2 apply(const Vec2& p) const {
        double w = m[6] * p.x + m[7] * p.y + m[8];
        return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
    }

    double det() const;
    Homography inverse() const;  // throws DegenerateQuad if not invertible
};

// Solves the 8-unknown linear system from the 4 correspondences src -> dst,
// with m[2][2] fixed to 1. Rejects condition numbers above 1e12 and verifies
// every corner re-projects within 1e-6.
Homography solve_homography(const Quad& src, const Quad& dst);

// --- Polygon helpers ---------------------------------------------------------

double polygon_area(const std::vector<Vec2>& vertices);  // signed, y-down
bool polygon_is_simple(const std::vector<Vec2>& vertices);
bool point_in_polygon_even_odd(const Vec2& p, const std::vector<Vec2>& vertices);

std::vector<Vec2> convex_hull(std::vector<Vec2> points);
// Minimum-area oriented bounding box, corners in canonical TL,TR,BR,BL order.
std::array<Vec2, 4> min_area_obb(const std::vector<Vec2>& points);

// Binary mask: pixel centers inside the polygon (even-odd rule) get 1.
MaskImage rasterize_polygon(const std::vector<Vec2>& vertices, int img_h, int img_w);

// --- Differentiable warp -----------------------------------------------------

// Precomputed inverse-mapped bilinear taps for one homography and size pair.
// The warp is a fixed sparse linear map of the source pixels, so the forward
// pass and its transpose (the gradient) share the same tap table.
struct WarpPlan {
    int out_h = 0, out_w = 0;
    int src_h = 0, src_w = 0;
    struct Tap {
        std::array<int32_t, 4> idx;  // flattened src pixel index, -1 when outside
        std::array<double, 4> w;
    };
    std::vector<Tap> taps;  // out_h * out_w
};

// `pattern_to_out` maps pattern coordinates to output coordinates; the plan
// inverse-maps each output pixel and clips taps that fall outside the pattern
// (zero fill).
WarpPlan make_warp_plan(const Homography& pattern_to_out, int src_h, int src_w, int out_h,
                        int out_w);

Image apply_warp(const WarpPlan& plan, const Image& src);
// Transpose of apply_warp: scatters output-pixel gradients back to the source.
Image warp_backward(const WarpPlan& plan, const Image& grad_out);

Image warp_pattern(const Image& pattern, const Homography& h, int out_h, int out_w);

// --- Compositing -------------------------------------------------------------

// out = (1 - mask) * original + mask * warped, per channel.
Image composite(const Image& original, const Image& warped, const MaskImage& mask);
// Gradient of composite w.r.t. `warped`: mask * grad_out.
Image composite_backward_pattern(const MaskImage& mask, const Image& grad_out);

}  // namespace cloak
