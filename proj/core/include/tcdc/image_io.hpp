#pragma once

#include <filesystem>

#include "tcdc/tensor.hpp"

namespace tcdc {

/// Reads binary PGM (P5) or PPM (P6) with maxval <= 255 into [C, H, W] in [0, 1]
/// (C = 1 or 3). Other variants throw UnsupportedPixelFormat.
Tensor read_pnm(const std::filesystem::path& path);

/// Writes [3, H, W] as P6 or [1, H, W] / [H, W] as P5, quantizing [0, 1] to 8 bits.
void write_pnm(const Tensor& image, const std::filesystem::path& path);

}  // namespace tcdc
