#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advtex/grid.hpp"

namespace advtex {

// Decodes 8-bit gray/gray-alpha/RGB/RGBA PNG into a 3-channel frame in [0,1].
// Alpha is dropped; gray is replicated across channels.
ImageFrame read_png(const std::string& path);

// Encodes as 8-bit RGB. Values are clamped to [0,1] and quantized with
// round-half-to-even so repeated save/load cycles are stable.
void write_png(const ImageFrame& frame, const std::string& path);

// Grayscale mask image: a pixel is set when its first channel is >= 128.
Mask3 read_mask_png(const std::string& path);

void write_mask_png(const Mask3& mask, const std::string& path);

uint8_t quantize_channel(double v);

// RGB PNG encoded into a memory buffer; same quantization as write_png.
std::vector<unsigned char> encode_png(const ImageFrame& frame);

}  // namespace advtex
