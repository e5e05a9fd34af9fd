// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ovseg {

bool PanopticMap::well_formed() const {
  if (ids.rows() != h || ids.cols() != w) return false;
  std::set<int> present;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int id = ids(y, x);
      if (id < 0) return false;
      if (id != 0) present.insert(id);
    }
  if (present.size() != segments.size()) return false;
  for (int id : present)
    if (!segments.count(id)) return false;
  return true;
}

InterpPlan make_bilinear_plan(int src_h, int src_w, int dst_h, int dst_w) {
  InterpPlan plan;
  plan.src_h = src_h;
  plan.src_w = src_w;
  plan.dst_h = dst_h;
  plan.dst_w = dst_w;
  plan.src_index.resize(static_cast<size_t>(dst_h) * dst_w * 4);
  plan.src_weight.resize(static_cast<size_t>(dst_h) * dst_w * 4);
  const double sy = static_cast<double>(src_h) / dst_h;
  const double sx = static_cast<double>(src_w) / dst_w;
  for (int y = 0; y < dst_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, src_h - 1);
    int y1c = std::clamp(y0 + 1, 0, src_h - 1);
    for (int x = 0; x < dst_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, src_w - 1);
      int x1c = std::clamp(x0 + 1, 0, src_w - 1);
      size_t base = (static_cast<size_t>(y) * dst_w + x) * 4;
      plan.src_index[base + 0] = y0c * src_w + x0c;
      plan.src_index[base + 1] = y0c * src_w + x1c;
      plan.src_index[base + 2] = y1c * src_w + x0c;
      plan.src_index[base + 3] = y1c * src_w + x1c;
      plan.src_weight[base + 0] = (1 - wy) * (1 - wx);
      plan.src_weight[base + 1] = (1 - wy) * wx;
      plan.src_weight[base + 2] = wy * (1 - wx);
      plan.src_weight[base + 3] = wy * wx;
    }
  }
  return plan;
}

Mat apply_interp(const InterpPlan& plan, const Mat& src) {
  const int out_px = plan.dst_h * plan.dst_w;
  Mat dst = Mat::Zero(out_px, src.cols());
  for (int p = 0; p < out_px; ++p) {
    size_t base = static_cast<size_t>(p) * 4;
    for (int t = 0; t < 4; ++t)
      dst.row(p) += plan.src_weight[base + t] * src.row(plan.src_index[base + t]);
  }
  return dst;
}

Mat apply_interp_rows(const InterpPlan& plan, const Mat& src) {
  const int out_px = plan.dst_h * plan.dst_w;
  Mat dst = Mat::Zero(src.rows(), out_px);
  for (int p = 0; p < out_px; ++p) {
    size_t base = static_cast<size_t>(p) * 4;
    for (int t = 0; t < 4; ++t)
      dst.col(p) += plan.src_weight[base + t] * src.col(plan.src_index[base + t]);
  }
  return dst;
}

}  // namespace ovseg
