// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ovseg {

Param& ParamStore::create(const std::string& name, int rows, int cols, bool trainable) {
  auto [it, inserted] = params_.try_emplace(name);
  if (inserted) {
    it->second.value = Mat::Zero(rows, cols);
    it->second.trainable = trainable;
  }
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::runtime_error("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::runtime_error("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [_, p] : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (auto& [n, _] : params_) out.push_back(n);
  return out;
}

uint64_t ParamStore::checksum(const std::string& prefix) const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, p] : params_) {
    if (name.rfind(prefix, 0) != 0) continue;
    mix(name.data(), name.size());
    mix(p.value.data(), sizeof(double) * p.value.size());
  }
  return h;
}

namespace {
constexpr char kMagic[8] = {'O', 'V', 'C', 'K', 'P', 'T', '1', '\n'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void ParamStore::save(const std::string& path, const std::string& meta_json) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  uint64_t meta_len = meta_json.size();
  write_pod(os, meta_len);
  os.write(meta_json.data(), static_cast<std::streamsize>(meta_len));
  uint64_t count = params_.size();
  write_pod(os, count);
  for (const auto& [name, p] : params_) {
    uint32_t nlen = static_cast<uint32_t>(name.size());
    write_pod(os, nlen);
    os.write(name.data(), nlen);
    uint64_t rows = p.value.rows(), cols = p.value.cols();
    write_pod(os, rows);
    write_pod(os, cols);
    uint8_t trainable = p.trainable ? 1 : 0;
    write_pod(os, trainable);
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(sizeof(double) * p.value.size()));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::string ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  uint64_t meta_len = 0;
  read_pod(is, meta_len);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  uint64_t count = 0;
  read_pod(is, count);
  params_.clear();
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t nlen = 0;
    read_pod(is, nlen);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    uint64_t rows = 0, cols = 0;
    read_pod(is, rows);
    read_pod(is, cols);
    uint8_t trainable = 0;
    read_pod(is, trainable);
    Param p;
    p.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    p.trainable = trainable != 0;
    params_.emplace(std::move(name), std::move(p));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return meta;
}

ag::Node* GraphBinding::operator()(const std::string& name) {
  Param& p = store_.at(name);
  bool track = p.trainable && !(backbone_frozen_ && name.rfind("backbone.", 0) == 0);
  ag::Node* n = graph_.leaf(p.value, track);
  if (track) bound_.emplace_back(n, &p);
  return n;
}

void GraphBinding::flush_grads() {
  for (auto& [node, param] : bound_) {
    if (node->grad.size() == 0) continue;
    if (param->grad.size() == 0) param->grad = Mat::Zero(param->value.rows(), param->value.cols());
    param->grad += node->grad;
  }
}

void AdamW::step(ParamStore& store, double lr_scale) {
  ++t_;
  const double lr = cfg_.lr * lr_scale;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (const auto& name : store.names()) {
    Param& p = store.at(name);
    if (!p.trainable || p.grad.size() == 0) continue;
    auto& [m, v] = moments_[name];
    if (m.size() == 0) {
      m = Mat::Zero(p.value.rows(), p.value.cols());
      v = Mat::Zero(p.value.rows(), p.value.cols());
    }
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = m / bc1;
    Mat vhat = v / bc2;
    p.value -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
    p.value -= lr * cfg_.weight_decay * p.value;
  }
}

void xavier_init(Mat& m, std::mt19937_64& rng) {
  double bound = std::sqrt(6.0 / (m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

}  // namespace ovseg
