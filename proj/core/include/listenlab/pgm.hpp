#pragma once

#include <string>

#include "listenlab/tensor.hpp"

namespace listenlab {

// Writes a (H,W) image with values in [0,1] as a binary P5 PGM, maxval 255.
// Quantization is value*255 with round-half-up (0.5 maps to gray 128), then
// clamped to [0,255].
void write_pgm(const std::string& path, const Tensor<float>& image);

}  // namespace listenlab
