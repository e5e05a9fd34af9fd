// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/data.hpp"

#include "ovseg/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

namespace ovseg {

namespace {

struct Shape {
  enum Type { kDisk, kRect, kTriangle };
  Type type;
  int category;
  double cx, cy, size, aspect, angle;

  bool contains(double x, double y) const {
    double dx = x - cx, dy = y - cy;
    switch (type) {
      case kDisk:
        return dx * dx + dy * dy <= size * size;
      case kRect: {
        double c = std::cos(angle), s = std::sin(angle);
        double u = c * dx + s * dy, v = -s * dx + c * dy;
        return std::abs(u) <= size && std::abs(v) <= size * aspect;
      }
      case kTriangle: {
        // Equilateral triangle rotated by `angle`.
        double vx[3], vy[3];
        for (int i = 0; i < 3; ++i) {
          double a = angle + i * 2.0 * M_PI / 3.0;
          vx[i] = cx + size * std::cos(a);
          vy[i] = cy + size * std::sin(a);
        }
        double sgn = 0.0;
        for (int i = 0; i < 3; ++i) {
          int j = (i + 1) % 3;
          double cross = (vx[j] - vx[i]) * (y - vy[i]) - (vy[j] - vy[i]) * (x - vx[i]);
          if (i == 0)
            sgn = cross;
          else if (cross * sgn < 0)
            return false;
        }
        return true;
      }
    }
    return false;
  }
};

}  // namespace

std::vector<Category> color_world_categories(const ColorWorldSpec& spec) {
  std::set<std::string> seen;
  std::vector<Category> cats;
  auto push = [&](const std::string& color, bool is_thing) {
    if (!seen.insert(color).second)
      throw std::invalid_argument("color world color sets must be disjoint: " + color);
    Category c;
    c.id = static_cast<int>(cats.size());
    c.names = {color};
    c.is_thing = is_thing;
    cats.push_back(std::move(c));
  };
  for (const auto& c : spec.train_stuff) push(c, false);
  for (const auto& c : spec.train_things) push(c, true);
  for (const auto& c : spec.heldout_stuff) push(c, false);
  for (const auto& c : spec.heldout_things) push(c, true);
  return cats;
}

Dataset generate_color_world(uint64_t seed, int count, const ColorWorldSpec& spec,
                             bool include_heldout, int size) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  Dataset ds;
  ds.categories = color_world_categories(spec);

  std::vector<int> stuff_ids, thing_ids;
  for (const auto& c : ds.categories) {
    bool heldout = c.id >= spec.train_color_count();
    if (heldout && !include_heldout) continue;
    (c.is_thing ? thing_ids : stuff_ids).push_back(c.id);
  }

  // Segments below this visible area are not resolvable on the coarse
  // joint-space grid; layouts producing them are resampled.
  const long long min_area = std::max(16, size * size / 40);

  for (int img_idx = 0; img_idx < count; ++img_idx) {
    // Per-image engine: regeneration is bitwise identical and order-free.
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + img_idx);
    std::uniform_real_distribution<double> ur(0.0, 1.0);

    Sample sample;
    sample.image = Image(size, size);
    sample.gt = PanopticMap(size, size);
    int bg_cat = 0;
    std::vector<Shape> shapes;
    for (int attempt = 0; attempt < 64; ++attempt) {
      uint64_t layout_seed =
          (seed * 0x9e3779b97f4a7c15ull + img_idx) ^ (0xc2b2ae3d27d4eb4full * (attempt + 1));
      std::mt19937_64 lrng(layout_seed);
      std::uniform_real_distribution<double> lur(0.0, 1.0);
      bg_cat = stuff_ids[lrng() % stuff_ids.size()];
      int n_shapes = 1 + static_cast<int>(lrng() % 4);
      n_shapes = std::min<int>(n_shapes, static_cast<int>(thing_ids.size()));
      // Distinct colors per scene: color is class identity here, and
      // same-class instance splitting has no training signal without a
      // no-object class.
      std::vector<int> palette = thing_ids;
      std::shuffle(palette.begin(), palette.end(), lrng);
      shapes.clear();
      for (int s = 0; s < n_shapes; ++s) {
        Shape sh;
        sh.type = static_cast<Shape::Type>(lrng() % 3);
        sh.category = palette[s];
        sh.cx = (0.15 + 0.7 * lur(lrng)) * size;
        sh.cy = (0.15 + 0.7 * lur(lrng)) * size;
        sh.size = size * (0.16 + 0.14 * lur(lrng));
        sh.aspect = 0.6 + 0.8 * lur(lrng);
        sh.angle = lur(lrng) * 2.0 * M_PI;
        shapes.push_back(sh);
      }
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          int seg = 1;  // background
          // back-to-front: later shapes occlude earlier ones
          for (int s = static_cast<int>(shapes.size()) - 1; s >= 0; --s)
            if (shapes[s].contains(x + 0.5, y + 0.5)) {
              seg = 2 + s;
              break;
            }
          sample.gt.ids(y, x) = seg;
        }
      std::map<int, long long> area;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) ++area[sample.gt.ids(y, x)];
      bool ok = true;
      for (int s = 0; s < n_shapes; ++s)
        if (area[2 + s] < min_area) ok = false;
      if (area[1] < min_area) ok = false;
      if (ok) break;
    }

    std::vector<int> seg_category(shapes.size() + 2, -1);
    seg_category[1] = bg_cat;
    for (size_t s = 0; s < shapes.size(); ++s) seg_category[2 + s] = shapes[s].category;

    std::uniform_real_distribution<double> noise(-0.02, 0.02);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        int seg = sample.gt.ids(y, x);
        Eigen::Vector3d rgb =
            ToyColorTextEncoder::color_rgb(ds.categories[seg_category[seg]].names[0]);
        for (int c = 0; c < 3; ++c)
          sample.image.pixels(y * size + x, c) =
              std::clamp(rgb(c) + noise(rng), 0.0, 1.0);
      }

    std::set<int> present;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) present.insert(sample.gt.ids(y, x));
    for (int id : present) {
      SegmentInfo info;
      info.category = seg_category[id];
      info.is_thing = ds.categories[info.category].is_thing;
      sample.gt.segments[id] = info;
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

void save_coco_panoptic(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "panoptic");
  nlohmann::json ann;
  ann["categories"] = nlohmann::json::array();
  for (const auto& c : ds.categories) {
    std::string names;
    for (size_t i = 0; i < c.names.size(); ++i) {
      if (i) names += ", ";
      names += c.names[i];
    }
    ann["categories"].push_back({{"id", c.id}, {"name", names}, {"isthing", c.is_thing ? 1 : 0}});
  }
  ann["images"] = nlohmann::json::array();
  ann["annotations"] = nlohmann::json::array();
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    char name[64];
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    write_png((fs::path(dir) / "images" / name).string(), s.image);
    write_id_map_png((fs::path(dir) / "panoptic" / name).string(), s.gt.ids);
    ann["images"].push_back({{"id", static_cast<int>(i)},
                             {"file_name", name},
                             {"height", s.image.h},
                             {"width", s.image.w}});
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& [id, info] : s.gt.segments) {
      int area = 0;
      for (int y = 0; y < s.gt.h; ++y)
        for (int x = 0; x < s.gt.w; ++x)
          if (s.gt.ids(y, x) == id) ++area;
      segments.push_back({{"id", id}, {"category_id", info.category}, {"area", area}});
    }
    ann["annotations"].push_back(
        {{"image_id", static_cast<int>(i)}, {"file_name", name}, {"segments_info", segments}});
  }
  std::ofstream os((fs::path(dir) / "annotations.json").string());
  os << ann.dump(2) << "\n";
}

Dataset load_coco_panoptic(const std::string& images_dir, const std::string& annotations_file) {
  namespace fs = std::filesystem;
  std::ifstream is(annotations_file);
  if (!is) throw std::runtime_error("cannot open annotations: " + annotations_file);
  nlohmann::json ann;
  is >> ann;

  Dataset ds;
  for (const auto& c : ann.at("categories")) {
    Category cat;
    cat.id = c.at("id").get<int>();
    std::string names = c.at("name").get<std::string>();
    std::stringstream ss(names);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!normalize_name(part).empty()) cat.names.push_back(part);
    cat.is_thing = c.at("isthing").get<int>() != 0;
    ds.categories.push_back(std::move(cat));
  }
  std::sort(ds.categories.begin(), ds.categories.end(),
            [](const Category& a, const Category& b) { return a.id < b.id; });

  std::map<int, nlohmann::json> ann_by_image;
  for (const auto& a : ann.at("annotations")) ann_by_image[a.at("image_id").get<int>()] = a;

  fs::path panoptic_dir = fs::path(annotations_file).parent_path() / "panoptic";
  for (const auto& im : ann.at("images")) {
    std::string file = im.at("file_name").get<std::string>();
    fs::path img_path = fs::path(images_dir) / file;
    if (!fs::exists(img_path)) throw std::runtime_error("missing image file: " + img_path.string());
    Sample s;
    s.image = read_png(img_path.string());
    s.gt.h = s.image.h;
    s.gt.w = s.image.w;
    s.gt.ids = read_id_map_png((panoptic_dir / file).string());

    std::set<int> present;
    for (int y = 0; y < s.gt.h; ++y)
      for (int x = 0; x < s.gt.w; ++x)
        if (s.gt.ids(y, x) != 0) present.insert(s.gt.ids(y, x));

    const auto& a = ann_by_image.at(im.at("id").get<int>());
    for (const auto& seg : a.at("segments_info")) {
      int id = seg.at("id").get<int>();
      if (!present.count(id)) {
        std::cerr << "warning: segment " << id << " in " << file
                  << " has no pixels; dropped\n";
        continue;
      }
      SegmentInfo info;
      info.category = seg.at("category_id").get<int>();
      info.is_thing = ds.categories.at(info.category).is_thing;
      s.gt.segments[id] = info;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace ovseg
