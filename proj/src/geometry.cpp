#include "cloak/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cloak/errors.hpp"

namespace cloak {

namespace {

constexpr double kCollinearEps = 1e-9;
constexpr double kMaxCondition = 1e12;
constexpr double kMinDet = 1e-9;
constexpr double kReprojectTol = 1e-6;

// Proper segment intersection (excluding shared endpoints).
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        double v = cross(q - p, r - p);
        if (std::abs(v) < 1e-12) return 0;
        return v > 0 ? 1 : -1;
    };
    int o1 = orient(a, b, c);
    int o2 = orient(a, b, d);
    int o3 = orient(c, d, a);
    int o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
    return false;
}

}  // namespace

bool quad_is_valid(const Quad& q) {
    const auto& p = q.points;
    for (int i = 0; i < 4; ++i) {
        const Vec2& a = p[i];
        const Vec2& b = p[(i + 1) % 4];
        const Vec2& c = p[(i + 2) % 4];
        double area2 = std::abs(cross(b - a, c - a));
        if (area2 < kCollinearEps) return false;
    }
    // Simple: the two pairs of opposite edges must not cross.
    if (segments_intersect(p[0], p[1], p[2], p[3])) return false;
    if (segments_intersect(p[1], p[2], p[3], p[0])) return false;
    return true;
}

void validate_quad(const Quad& q, const char* what) {
    if (!quad_is_valid(q)) {
        throw DegenerateQuad(std::string(what) + ": collinear or self-intersecting corners");
    }
}

double Homography::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::inverse() const {
    double d = det();
    if (std::abs(d) < 1e-15) throw DegenerateQuad("homography is not invertible");
    double inv = 1.0 / d;
    Homography r;
    r.m[0] = (m[4] * m[8] - m[5] * m[7]) * inv;
    r.m[1] = (m[2] * m[7] - m[1] * m[8]) * inv;
    r.m[2] = (m[1] * m[5] - m[2] * m[4]) * inv;
    r.m[3] = (m[5] * m[6] - m[3] * m[8]) * inv;
    r.m[4] = (m[0] * m[8] - m[2] * m[6]) * inv;
    r.m[5] = (m[2] * m[3] - m[0] * m[5]) * inv;
    r.m[6] = (m[3] * m[7] - m[4] * m[6]) * inv;
    r.m[7] = (m[1] * m[6] - m[0] * m[7]) * inv;
    r.m[8] = (m[0] * m[4] - m[1] * m[3]) * inv;
    return r;
}

Homography solve_homography(const Quad& src, const Quad& dst) {
    validate_quad(src, "solve_homography src");
    validate_quad(dst, "solve_homography dst");

    // Two equations per correspondence (x,y) -> (X,Y), unknowns m00..m21:
    //   m00 x + m01 y + m02 - m20 x X - m21 y X = X
    //   m10 x + m11 y + m12 - m20 x Y - m21 y Y = Y
    Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        double x = src.points[i].x, y = src.points[i].y;
        double X = dst.points[i].x, Y = dst.points[i].y;
        a(2 * i, 0) = x;
        a(2 * i, 1) = y;
        a(2 * i, 2) = 1;
        a(2 * i, 6) = -x * X;
        a(2 * i, 7) = -y * X;
        a(2 * i + 1, 3) = x;
        a(2 * i + 1, 4) = y;
        a(2 * i + 1, 5) = 1;
        a(2 * i + 1, 6) = -x * Y;
        a(2 * i + 1, 7) = -y * Y;
        b(2 * i) = X;
        b(2 * i + 1) = Y;
    }

    Eigen::JacobiSVD<Eigen::Matrix<double, 8, 8>> svd(a,
                                                      Eigen::ComputeFullU | Eigen::ComputeFullV);
    double smin = svd.singularValues()(7);
    double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > kMaxCondition) {
        throw DegenerateQuad("correspondence system is ill-conditioned");
    }
    Eigen::Matrix<double, 8, 1> h = svd.solve(b);

    Homography out;
    for (int i = 0; i < 8; ++i) out.m[static_cast<size_t>(i)] = h(i);
    out.m[8] = 1.0;

    if (std::abs(out.det()) < kMinDet) throw DegenerateQuad("solved homography is singular");
    for (int i = 0; i < 4; ++i) {
        Vec2 p = out.apply(src.points[i]);
        double err = std::hypot(p.x - dst.points[i].x, p.y - dst.points[i].y);
        if (!(err < kReprojectTol)) throw DegenerateQuad("re-projection check failed");
    }
    return out;
}

// --- Polygon helpers ---------------------------------------------------------

double polygon_area(const std::vector<Vec2>& v) {
    double a = 0.0;
    size_t n = v.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = v[i];
        const Vec2& q = v[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

bool polygon_is_simple(const std::vector<Vec2>& v) {
    size_t n = v.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            // Skip adjacent edges (shared endpoint).
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
        }
    }
    return true;
}

bool point_in_polygon_even_odd(const Vec2& p, const std::vector<Vec2>& v) {
    bool inside = false;
    size_t n = v.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        bool crosses = (v[i].y > p.y) != (v[j].y > p.y);
        if (crosses) {
            double xint = (v[j].x - v[i].x) * (p.y - v[i].y) / (v[j].y - v[i].y) + v[i].x;
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Vec2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {  // lower
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

std::array<Vec2, 4> min_area_obb(const std::vector<Vec2>& points) {
    if (points.size() < 3) throw DegeneratePolygon("oriented bounding box needs >= 3 points");
    std::vector<Vec2> hull = convex_hull(points);
    if (hull.size() < 3) throw DegeneratePolygon("points are collinear");

    double best_area = std::numeric_limits<double>::max();
    std::array<Vec2, 4> best{};
    size_t n = hull.size();
    for (size_t i = 0; i < n; ++i) {
        Vec2 e = hull[(i + 1) % n] - hull[i];
        double len = std::hypot(e.x, e.y);
        if (len < 1e-12) continue;
        Vec2 u{e.x / len, e.y / len};   // edge direction
        Vec2 v{-u.y, u.x};              // normal
        double umin = std::numeric_limits<double>::max(), umax = -umin;
        double vmin = umin, vmax = -umin;
        for (const Vec2& p : hull) {
            double pu = dot(p, u), pv = dot(p, v);
            umin = std::min(umin, pu);
            umax = std::max(umax, pu);
            vmin = std::min(vmin, pv);
            vmax = std::max(vmax, pv);
        }
        double area = (umax - umin) * (vmax - vmin);
        if (area < best_area) {
            best_area = area;
            best[0] = umin * u + vmin * v;
            best[1] = umax * u + vmin * v;
            best[2] = umax * u + vmax * v;
            best[3] = umin * u + vmax * v;
        }
    }

    // Canonical order: start at the corner with the smallest x+y, keep the
    // winding that puts positive signed area under y-down coordinates.
    std::array<Vec2, 4> c = best;
    double a2 = cross(c[1] - c[0], c[2] - c[0]);
    if (a2 < 0) std::swap(c[1], c[3]);
    int start = 0;
    double bestkey = std::numeric_limits<double>::max();
    for (int i = 0; i < 4; ++i) {
        double key = c[i].x + c[i].y;
        if (key < bestkey - 1e-12) {
            bestkey = key;
            start = i;
        }
    }
    std::array<Vec2, 4> out{};
    for (int i = 0; i < 4; ++i) out[i] = c[(start + i) % 4];
    return out;
}

MaskImage rasterize_polygon(const std::vector<Vec2>& vertices, int img_h, int img_w) {
    if (vertices.size() < 3) throw DegeneratePolygon("polygon needs at least 3 vertices");
    if (std::abs(polygon_area(vertices)) < 1e-12) throw DegeneratePolygon("polygon has zero area");

    MaskImage mask(img_h, img_w, 1, 0.0);
    for (int y = 0; y < img_h; ++y) {
        for (int x = 0; x < img_w; ++x) {
            Vec2 center{x + 0.5, y + 0.5};
            if (point_in_polygon_even_odd(center, vertices)) mask.at(y, x, 0) = 1.0;
        }
    }
    return mask;
}

// --- Differentiable warp -----------------------------------------------------

WarpPlan make_warp_plan(const Homography& pattern_to_out, int src_h, int src_w, int out_h,
                        int out_w) {
    Homography inv = pattern_to_out.inverse();
    WarpPlan plan;
    plan.out_h = out_h;
    plan.out_w = out_w;
    plan.src_h = src_h;
    plan.src_w = src_w;
    plan.taps.resize(static_cast<size_t>(out_h) * out_w);

    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            Vec2 s = inv.apply({x + 0.5, y + 0.5});
            // Continuous -> lattice: pixel (i,j) holds the sample at (j+0.5, i+0.5).
            double u = s.x - 0.5;
            double v = s.y - 0.5;
            int x0 = static_cast<int>(std::floor(u));
            int y0 = static_cast<int>(std::floor(v));
            double fx = u - x0;
            double fy = v - y0;
            WarpPlan::Tap tap{};
            const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
            const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
            for (int k = 0; k < 4; ++k) {
                if (xs[k] >= 0 && xs[k] < src_w && ys[k] >= 0 && ys[k] < src_h) {
                    tap.idx[static_cast<size_t>(k)] = ys[k] * src_w + xs[k];
                } else {
                    tap.idx[static_cast<size_t>(k)] = -1;  // zero fill
                }
                tap.w[static_cast<size_t>(k)] = ws[k];
            }
            plan.taps[static_cast<size_t>(y) * out_w + x] = tap;
        }
    }
    return plan;
}

Image apply_warp(const WarpPlan& plan, const Image& src) {
    if (src.empty()) throw DimensionMismatch("apply_warp: empty source");
    if (src.h != plan.src_h || src.w != plan.src_w) {
        throw DimensionMismatch("apply_warp: source does not match plan");
    }
    const int c = src.c;
    Image out(plan.out_h, plan.out_w, c, 0.0);
    for (size_t i = 0; i < plan.taps.size(); ++i) {
        const auto& tap = plan.taps[i];
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                int32_t idx = tap.idx[static_cast<size_t>(k)];
                if (idx >= 0) {
                    acc += tap.w[static_cast<size_t>(k)] *
                           src.data[static_cast<size_t>(idx) * c + ch];
                }
            }
            out.data[i * c + ch] = acc;
        }
    }
    return out;
}

Image warp_backward(const WarpPlan& plan, const Image& grad_out) {
    if (grad_out.h != plan.out_h || grad_out.w != plan.out_w) {
        throw DimensionMismatch("warp_backward: gradient does not match plan");
    }
    const int c = grad_out.c;
    Image grad_src(plan.src_h, plan.src_w, c, 0.0);
    for (size_t i = 0; i < plan.taps.size(); ++i) {
        const auto& tap = plan.taps[i];
        for (int ch = 0; ch < c; ++ch) {
            double g = grad_out.data[i * c + ch];
            if (g == 0.0) continue;
            for (int k = 0; k < 4; ++k) {
                int32_t idx = tap.idx[static_cast<size_t>(k)];
                if (idx >= 0) {
                    grad_src.data[static_cast<size_t>(idx) * c + ch] +=
                        tap.w[static_cast<size_t>(k)] * g;
                }
            }
        }
    }
    return grad_src;
}

Image warp_pattern(const Image& pattern, const Homography& h, int out_h, int out_w) {
    return apply_warp(make_warp_plan(h, pattern.h, pattern.w, out_h, out_w), pattern);
}

// --- Compositing -------------------------------------------------------------

Image composite(const Image& original, const Image& warped, const MaskImage& mask) {
    require_same_shape(original, warped, "composite");
    if (mask.h != original.h || mask.w != original.w || mask.c != 1) {
        throw DimensionMismatch("composite: mask must be H x W x 1 matching the image");
    }
    Image out(original.h, original.w, original.c);
    for (int y = 0; y < original.h; ++y) {
        for (int x = 0; x < original.w; ++x) {
            double m = mask.at(y, x, 0);
            for (int ch = 0; ch < original.c; ++ch) {
                out.at(y, x, ch) = (1.0 - m) * original.at(y, x, ch) + m * warped.at(y, x, ch);
            }
        }
    }
    return out;
}

Image composite_backward_pattern(const MaskImage& mask, const Image& grad_out) {
    if (mask.h != grad_out.h || mask.w != grad_out.w || mask.c != 1) {
        throw DimensionMismatch("composite_backward_pattern: mask/gradient shape mismatch");
    }
    Image g(grad_out.h, grad_out.w, grad_out.c);
    for (int y = 0; y < grad_out.h; ++y) {
        for (int x = 0; x < grad_out.w; ++x) {
            double m = mask.at(y, x, 0);
            for (int ch = 0; ch < grad_out.c; ++ch) {
                g.at(y, x, ch) = m * grad_out.at(y, x, ch);
            }
        }
    }
    return g;
}

}  // namespace cloak
