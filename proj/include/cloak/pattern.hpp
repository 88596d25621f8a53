#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cloak/image.hpp"

namespace cloak {

enum class InitMode { kRandom, kTexture };

// The learnable square pixel grid. Values live directly in [0,1]; optimizer
// steps are followed by project() which clamps back into range.
struct AdversarialPattern {
    Image pixels;            // base_resolution x base_resolution x 3
    int base_resolution = 0;
    uint64_t seed = 0;
};

// Random mode fills i.i.d. uniform [0,1) from the seeded generator; texture
// mode box-resamples the given grid to size x size.
AdversarialPattern init_pattern(int size, InitMode mode, uint64_t seed,
                                const std::optional<Image>& texture = std::nullopt);

// Block-average pooling by factor base_resolution / target.
AdversarialPattern downsample(const AdversarialPattern& pattern, int target);
Image downsample_image(const Image& img, int target);
// Transpose of the pooling map: spreads grad / k^2 over each k x k block.
Image downsample_backward(const Image& grad_out, int base_resolution);

AdversarialPattern project(AdversarialPattern pattern);
void project_in_place(Image& pixels);

// 8-bit RGB PNG, value v -> round(v * 255).
void export_pattern(const AdversarialPattern& pattern, const std::string& path);
AdversarialPattern import_pattern(const std::string& path);

// Box (area-average) resampling; exact block means for integer downscaling.
Image area_resample(const Image& src, int out_h, int out_w);

}  // namespace cloak
