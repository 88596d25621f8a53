#pragma once

#include <string>

#include "cloak/image.hpp"

namespace cloak {

// 8-bit RGB PNG. Values are quantized with round(v * 255) on write and
// mapped back as v / 255 on read, so a round trip stays within 1/255.
void write_png(const Image& img, const std::string& path);  // throws IoFailure
Image read_png(const std::string& path);                    // throws IoFailure

}  // namespace cloak
