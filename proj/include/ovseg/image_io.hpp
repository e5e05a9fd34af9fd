// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/types.hpp"

#include <string>

namespace ovseg {

Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

// COCO-panoptic id encoding: id = R + 256*G + 256^2*B.
int rgb_to_segment_id(int r, int g, int b);
void segment_id_to_rgb(int id, int& r, int& g, int& b);

MatI read_id_map_png(const std::string& path);
void write_id_map_png(const std::string& path, const MatI& ids);

// Bilinear image resize.
Image resize_image(const Image& src, int dst_h, int dst_w);

// Deterministic overlay color per segment id.
void overlay_color(int segment_id, int& r, int& g, int& b);

}  // namespace ovseg
