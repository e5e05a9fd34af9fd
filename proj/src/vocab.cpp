// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/vocab.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace ovseg {

namespace {

const std::unordered_map<std::string, Eigen::Vector3d>& color_table() {
  static const std::unordered_map<std::string, Eigen::Vector3d> table = {
      {"red", {1.0, 0.0, 0.0}},     {"green", {0.0, 1.0, 0.0}},
      {"blue", {0.0, 0.0, 1.0}},    {"yellow", {1.0, 1.0, 0.0}},
      {"cyan", {0.0, 1.0, 1.0}},    {"magenta", {1.0, 0.0, 1.0}},
      {"orange", {1.0, 0.5, 0.0}},  {"white", {1.0, 1.0, 1.0}},
      {"gray", {0.5, 0.5, 0.5}},    {"purple", {0.5, 0.0, 1.0}},
      {"black", {0.0, 0.0, 0.0}},   {"pink", {1.0, 0.6, 0.8}},
      {"brown", {0.6, 0.3, 0.1}},   {"teal", {0.0, 0.5, 0.5}},
  };
  return table;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::string normalize_name(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (std::isspace(u) || std::ispunct(u)) {
      pending_space = true;
    }
  }
  return out;
}

ToyColorTextEncoder::ToyColorTextEncoder(uint64_t seed) : seed_(seed) {}

bool ToyColorTextEncoder::is_known_color(const std::string& word) {
  return color_table().count(normalize_name(word)) != 0;
}

Eigen::Vector3d ToyColorTextEncoder::color_rgb(const std::string& word) {
  auto it = color_table().find(normalize_name(word));
  if (it == color_table().end()) throw std::runtime_error("unknown color word: " + word);
  return it->second;
}

Vec ToyColorTextEncoder::embed(const std::string& name) const {
  std::string norm = normalize_name(name);
  // Whole-word scan: the first known color word in the phrase decides.
  std::istringstream ss(norm);
  std::string word;
  while (ss >> word) {
    auto it = color_table().find(word);
    if (it != color_table().end()) {
      Vec v(4);
      v << it->second(0), it->second(1), it->second(2), 1.0;
      return v / v.norm();
    }
  }
  // Unknown word: seeded hash-derived unit vector.
  uint64_t h = splitmix64(fnv1a(norm) ^ seed_);
  Vec v(4);
  for (int i = 0; i < 4; ++i) {
    h = splitmix64(h);
    v(i) = static_cast<double>(h >> 11) / static_cast<double>(1ull << 53) * 2.0 - 1.0;
  }
  double n = v.norm();
  if (n < 1e-12) v(0) = 1.0, n = 1.0;
  return v / n;
}

Vocabulary build_vocabulary(const std::vector<Category>& categories,
                            const TextEncoder& encoder,
                            const std::vector<std::string>& templates) {
  if (categories.empty()) throw std::invalid_argument("empty category list");
  if (templates.empty()) throw std::invalid_argument("empty template list");
  for (const auto& t : templates) {
    size_t pos = t.find("{}");
    if (pos == std::string::npos || t.find("{}", pos + 1) != std::string::npos)
      throw std::invalid_argument("template must contain exactly one {} placeholder: " + t);
  }
  for (size_t j = 0; j < categories.size(); ++j) {
    if (categories[j].id != static_cast<int>(j))
      throw std::invalid_argument("category ids must be contiguous from 0");
    if (categories[j].names.empty())
      throw std::invalid_argument("category without names: id " + std::to_string(j));
    for (const auto& n : categories[j].names)
      if (normalize_name(n).empty())
        throw std::invalid_argument("empty category name after normalization");
  }

  Vocabulary vocab;
  vocab.categories = categories;
  const int d = encoder.dim();
  vocab.embeddings = Mat::Zero(static_cast<int>(categories.size()), d);
  for (size_t j = 0; j < categories.size(); ++j) {
    Vec mean = Vec::Zero(d);
    int count = 0;
    for (const auto& tmpl : templates) {
      for (const auto& name : categories[j].names) {
        std::string filled = tmpl;
        filled.replace(filled.find("{}"), 2, name);
        mean += encoder.embed(filled);
        ++count;
      }
    }
    mean /= count;
    double n = mean.norm();
    if (n < 1e-12) throw std::runtime_error("degenerate mean embedding for category " +
                                            std::to_string(j));
    vocab.embeddings.row(static_cast<int>(j)) = (mean / n).transpose();
  }
  vocab.seen_mask.assign(categories.size(), true);
  return vocab;
}

std::vector<bool> partition_seen_unseen(const Vocabulary& test_vocab,
                                        const Vocabulary& train_vocab) {
  std::set<std::string> train_names;
  for (const auto& cat : train_vocab.categories)
    for (const auto& n : cat.names) train_names.insert(normalize_name(n));
  std::vector<bool> seen(test_vocab.categories.size(), false);
  for (size_t j = 0; j < test_vocab.categories.size(); ++j)
    for (const auto& n : test_vocab.categories[j].names)
      if (train_names.count(normalize_name(n))) {
        seen[j] = true;
        break;
      }
  return seen;
}

std::vector<Category> load_categories(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open vocabulary file: " + path);
  nlohmann::json j;
  is >> j;
  std::vector<Category> cats;
  for (const auto& rec : j) {
    Category c;
    c.id = rec.at("id").get<int>();
    c.is_thing = rec.at("is_thing").get<bool>();
    // Synonyms are comma-separated in the file.
    std::string names = rec.at("names").get<std::string>();
    std::stringstream ss(names);
    std::string part;
    while (std::getline(ss, part, ',')) {
      auto b = part.find_first_not_of(" \t");
      auto e = part.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      part = part.substr(b, e - b + 1);
      if (!normalize_name(part).empty()) c.names.push_back(part);
    }
    cats.push_back(std::move(c));
  }
  std::sort(cats.begin(), cats.end(), [](const Category& a, const Category& b) { return a.id < b.id; });
  return cats;
}

void save_categories(const std::vector<Category>& cats, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cats) {
    std::string names;
    for (size_t i = 0; i < c.names.size(); ++i) {
      if (i) names += ", ";
      names += c.names[i];
    }
    j.push_back({{"id", c.id}, {"names", names}, {"is_thing", c.is_thing}});
  }
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

std::vector<std::string> load_templates(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open template file: " + path);
  std::vector<std::string> templates;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    templates.push_back(line);
  }
  return templates;
}

}  // namespace ovseg
