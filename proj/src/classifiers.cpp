// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/classifiers.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace ovseg {

EnsembleParams::EnsembleParams(double a, double b, EnsembleMethod m)
    : alpha(a), beta(b), method(m) {
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0)
    throw std::invalid_argument("ensemble exponents must lie in [0,1]");
}

Mat mask_pool_weights(const Mat& mask_logits, int mask_h, int mask_w, int feat_h, int feat_w) {
  Mat logits = mask_logits;
  if (mask_h != feat_h || mask_w != feat_w) {
    InterpPlan plan = make_bilinear_plan(mask_h, mask_w, feat_h, feat_w);
    logits = apply_interp_rows(plan, mask_logits);
  }
  const int n = static_cast<int>(logits.rows());
  const int px = feat_h * feat_w;
  Mat weights = Mat::Zero(n, px);
  for (int i = 0; i < n; ++i) {
    double hard_sum = 0.0, soft_sum = 0.0;
    for (int p = 0; p < px; ++p) {
      double s = sigmoid(logits(i, p));
      soft_sum += s;
      if (s >= 0.5) {
        weights(i, p) = 1.0;
        hard_sum += 1.0;
      }
    }
    if (hard_sum > 0.0) {
      weights.row(i) /= hard_sum;
    } else if (soft_sum >= 1e-12) {
      for (int p = 0; p < px; ++p) weights(i, p) = sigmoid(logits(i, p)) / soft_sum;
    } else {
      weights.row(i).setConstant(1.0 / px);
    }
  }
  return weights;
}

Mat mask_pool(const Grid& features, const Mat& mask_logits, int mask_h, int mask_w) {
  return mask_pool_weights(mask_logits, mask_h, mask_w, features.h, features.w) * features.data;
}

ScoreMatrix in_vocab_probs(const Mat& pooled, const Vocabulary& vocab, double temperature) {
  if (vocab.size() == 0) throw std::invalid_argument("empty vocabulary");
  const int n = static_cast<int>(pooled.rows());
  ScoreMatrix probs(n, vocab.size());
  for (int i = 0; i < n; ++i) {
    double vn = std::max(pooled.row(i).norm(), 1e-12);
    Eigen::RowVectorXd z(vocab.size());
    for (int j = 0; j < vocab.size(); ++j) {
      double tn = std::max(vocab.embeddings.row(j).norm(), 1e-12);
      z(j) = pooled.row(i).dot(vocab.embeddings.row(j)) / (vn * tn) / temperature;
    }
    double m = z.maxCoeff();
    Eigen::ArrayXd e = (z.array() - m).exp();
    probs.row(i) = (e / e.sum()).matrix().transpose();
  }
  return probs;
}

ScoreMatrix out_vocab_probs(const Grid& clip_dense, const Mat& mask_logits, int mask_h,
                            int mask_w, const Vocabulary& vocab, double t_out) {
  Mat pooled = mask_pool(clip_dense, mask_logits, mask_h, mask_w);
  return in_vocab_probs(pooled, vocab, t_out);
}

ScoreMatrix ensemble(const ScoreMatrix& in_probs, const ScoreMatrix& out_probs,
                     const std::vector<bool>& seen_mask, const EnsembleParams& params) {
  if (in_probs.rows() != out_probs.rows() || in_probs.cols() != out_probs.cols())
    throw std::invalid_argument("classifier score shapes differ");
  if (static_cast<int>(seen_mask.size()) != in_probs.cols())
    throw std::invalid_argument("seen mask length must equal |C|");
  if (params.alpha < 0.0 || params.alpha > 1.0 || params.beta < 0.0 || params.beta > 1.0)
    throw std::invalid_argument("ensemble exponents must lie in [0,1]");
  ScoreMatrix fused(in_probs.rows(), in_probs.cols());
  for (int j = 0; j < in_probs.cols(); ++j) {
    double e = seen_mask[j] ? params.alpha : params.beta;
    for (int i = 0; i < in_probs.rows(); ++i) {
      if (params.method == EnsembleMethod::kGeometric) {
        fused(i, j) = std::pow(in_probs(i, j), 1.0 - e) * std::pow(out_probs(i, j), e);
      } else {
        fused(i, j) = (1.0 - e) * in_probs(i, j) + e * out_probs(i, j);
      }
    }
  }
  return fused;
}

void dump_score_matrix(const ScoreMatrix& scores, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open score dump for writing: " + path);
  for (int i = 0; i < scores.rows(); ++i) {
    nlohmann::json rec;
    rec["proposal"] = i;
    std::vector<double> row(scores.cols());
    for (int j = 0; j < scores.cols(); ++j) row[j] = scores(i, j);
    rec["scores"] = row;
    os << rec.dump() << "\n";
  }
}

ScoreMatrix load_score_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open score dump: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto rec = nlohmann::json::parse(line);
    rows.push_back(rec.at("scores").get<std::vector<double>>());
  }
  ScoreMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return m;
}

}  // namespace ovseg
