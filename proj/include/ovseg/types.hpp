// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovseg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MatI = Eigen::MatrixXi;

// Spatial feature map stored row-major by pixel: data(y * w + x, c).
struct Grid {
  int h = 0;
  int w = 0;
  Mat data;  // (h*w) x channels

  Grid() = default;
  Grid(int h_, int w_, int channels) : h(h_), w(w_), data(Mat::Zero(h_ * w_, channels)) {}
  int channels() const { return static_cast<int>(data.cols()); }
  int pixels() const { return h * w; }
};

// RGB image, values in [0,1], pixels(y * w + x, {r,g,b}).
struct Image {
  int h = 0;
  int w = 0;
  Mat pixels;  // (h*w) x 3

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), pixels(Mat::Zero(h_ * w_, 3)) {}
};

struct SegmentInfo {
  int category = -1;
  bool is_thing = false;
  double score = 1.0;
};

// Per-pixel segment ids (0 = void) plus the segment table.
struct PanopticMap {
  int h = 0;
  int w = 0;
  MatI ids;  // h x w
  std::map<int, SegmentInfo> segments;

  PanopticMap() = default;
  PanopticMap(int h_, int w_) : h(h_), w(w_), ids(MatI::Zero(h_, w_)) {}

  // Map/table consistency: every nonzero id in the map appears in the
  // table and vice versa.
  bool well_formed() const;
};

// Bilinear interpolation plan from one spatial size to another
// (align_corners = false). Each output pixel draws from up to 4 sources.
struct InterpPlan {
  int src_h = 0, src_w = 0, dst_h = 0, dst_w = 0;
  std::vector<int> src_index;      // 4 per output pixel
  std::vector<double> src_weight;  // 4 per output pixel
};

InterpPlan make_bilinear_plan(int src_h, int src_w, int dst_h, int dst_w);

// Applies the plan to a (src_h*src_w) x C matrix -> (dst_h*dst_w) x C.
Mat apply_interp(const InterpPlan& plan, const Mat& src);

// Applies the plan independently to each row of a (rows x src_h*src_w)
// matrix, e.g. per-proposal mask logits.
Mat apply_interp_rows(const InterpPlan& plan, const Mat& src);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace ovseg
