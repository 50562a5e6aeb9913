#pragma once

#include <string>

#include "maskd/modules.hpp"

namespace maskd {

// Binary netpbm grayscale (P5, maxval 255). values must lie in [0,1];
// bytes are round(255*v) with round-half-up, so 0.5 maps to 128.
void write_pgm(const std::string& path, const double* values, int h, int w);

// One image per token, named mask_{stage}_{token}.pgm under dir.
void export_mask_images(const MaskSet& masks, int h, int w, const std::string& dir, int stage_id);

}  // namespace maskd
