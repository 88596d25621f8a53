#include "cloak/pattern.hpp"

#include <algorithm>
#include <cmath>

#include "cloak/errors.hpp"
#include "cloak/image_io.hpp"
#include "cloak/rng.hpp"

namespace cloak {

Image area_resample(const Image& src, int out_h, int out_w) {
    if (src.empty()) throw DimensionMismatch("area_resample: empty source");
    Image out(out_h, out_w, src.c, 0.0);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (int ox = 0; ox < out_w; ++ox) {
            double x0 = ox * sx, x1 = (ox + 1) * sx;
            // Integrate the source over the covered rectangle.
            for (int ch = 0; ch < src.c; ++ch) {
                double acc = 0.0;
                for (int y = static_cast<int>(std::floor(y0)); y < std::ceil(y1); ++y) {
                    double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                    if (wy <= 0) continue;
                    int yc = std::clamp(y, 0, src.h - 1);
                    for (int x = static_cast<int>(std::floor(x0)); x < std::ceil(x1); ++x) {
                        double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                        if (wx <= 0) continue;
                        int xc = std::clamp(x, 0, src.w - 1);
                        acc += wy * wx * src.at(yc, xc, ch);
                    }
                }
                out.at(oy, ox, ch) = acc / (sy * sx);
            }
        }
    }
    return out;
}

AdversarialPattern init_pattern(int size, InitMode mode, uint64_t seed,
                                const std::optional<Image>& texture) {
    if (size < 8) throw Error("init_pattern: size must be >= 8");
    if (mode == InitMode::kTexture && !texture.has_value()) {
        throw MissingTexture("texture mode requires a texture image");
    }
    if (mode == InitMode::kRandom && texture.has_value()) {
        throw Error("init_pattern: texture given but mode is random");
    }

    AdversarialPattern p;
    p.base_resolution = size;
    p.seed = seed;
    if (mode == InitMode::kRandom) {
        p.pixels = Image(size, size, 3);
        Rng rng(seed);
        for (double& v : p.pixels.data) v = rng.uniform();
    } else {
        p.pixels = area_resample(*texture, size, size);
        project_in_place(p.pixels);
    }
    return p;
}

Image downsample_image(const Image& img, int target) {
    if (target <= 0 || img.h % target != 0 || img.w != img.h) {
        throw NonDivisibleTarget("downsample target must divide the base resolution");
    }
    const int k = img.h / target;
    Image out(target, target, img.c, 0.0);
    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (int oy = 0; oy < target; ++oy) {
        for (int ox = 0; ox < target; ++ox) {
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        acc += img.at(oy * k + dy, ox * k + dx, ch);
                    }
                }
                out.at(oy, ox, ch) = acc * inv;
            }
        }
    }
    return out;
}

AdversarialPattern downsample(const AdversarialPattern& pattern, int target) {
    AdversarialPattern out;
    out.pixels = downsample_image(pattern.pixels, target);
    out.base_resolution = target;
    out.seed = pattern.seed;
    return out;
}

Image downsample_backward(const Image& grad_out, int base_resolution) {
    if (grad_out.h != grad_out.w || base_resolution % grad_out.h != 0) {
        throw NonDivisibleTarget("downsample_backward: resolution mismatch");
    }
    const int k = base_resolution / grad_out.h;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    Image g(base_resolution, base_resolution, grad_out.c, 0.0);
    for (int oy = 0; oy < grad_out.h; ++oy) {
        for (int ox = 0; ox < grad_out.w; ++ox) {
            for (int ch = 0; ch < grad_out.c; ++ch) {
                double v = grad_out.at(oy, ox, ch) * inv;
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        g.at(oy * k + dy, ox * k + dx, ch) = v;
                    }
                }
            }
        }
    }
    return g;
}

void project_in_place(Image& pixels) {
    for (double& v : pixels.data) v = std::clamp(v, 0.0, 1.0);
}

AdversarialPattern project(AdversarialPattern pattern) {
    project_in_place(pattern.pixels);
    return pattern;
}

void export_pattern(const AdversarialPattern& pattern, const std::string& path) {
    write_png(pattern.pixels, path);
}

AdversarialPattern import_pattern(const std::string& path) {
    AdversarialPattern p;
    p.pixels = read_png(path);
    if (p.pixels.h != p.pixels.w) throw IoFailure("pattern image must be square: " + path);
    p.base_resolution = p.pixels.h;
    p.seed = 0;
    return p;
}

}  // namespace cloak
