// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#include "ovseg/autodiff.hpp"

#include <cmath>

namespace ovseg::ag {

Node* Graph::leaf(Mat value, bool requires_grad) {
  auto n = std::make_unique<Node>();
  n->graph = this;
  n->val = std::move(value);
  n->requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

Node* Graph::make(Mat value, bool requires_grad, std::function<void(const Node&)> fn) {
  auto n = std::make_unique<Node>();
  n->graph = this;
  n->val = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->backward_fn = std::move(fn);
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

void Graph::backward(Node* root) {
  if (root->val.size() != 1) throw std::runtime_error("backward root must be scalar");
  root->grad = Mat::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->requires_grad && n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

namespace {
bool rg(Node* a) { return a->requires_grad; }
bool rg(Node* a, Node* b) { return a->requires_grad || b->requires_grad; }
}  // namespace

Node* add(Node* a, Node* b) {
  return a->graph->make(a->val + b->val, rg(a, b), [a, b](const Node& out) {
    if (a->requires_grad) a->add_grad(out.grad);
    if (b->requires_grad) b->add_grad(out.grad);
  });
}

Node* sub(Node* a, Node* b) {
  return a->graph->make(a->val - b->val, rg(a, b), [a, b](const Node& out) {
    if (a->requires_grad) a->add_grad(out.grad);
    if (b->requires_grad) b->add_grad(-out.grad);
  });
}

Node* cmul(Node* a, Node* b) {
  return a->graph->make(a->val.cwiseProduct(b->val), rg(a, b), [a, b](const Node& out) {
    if (a->requires_grad) a->add_grad(out.grad.cwiseProduct(b->val));
    if (b->requires_grad) b->add_grad(out.grad.cwiseProduct(a->val));
  });
}

Node* scale(Node* a, double c) {
  return a->graph->make(a->val * c, rg(a), [a, c](const Node& out) {
    a->add_grad(out.grad * c);
  });
}

Node* add_const(Node* a, const Mat& c) {
  return a->graph->make(a->val + c, rg(a), [a](const Node& out) { a->add_grad(out.grad); });
}

Node* add_row_broadcast(Node* a, Node* row) {
  Mat v = a->val;
  v.rowwise() += row->val.row(0);
  return a->graph->make(std::move(v), rg(a, row), [a, row](const Node& out) {
    if (a->requires_grad) a->add_grad(out.grad);
    if (row->requires_grad) row->add_grad(out.grad.colwise().sum());
  });
}

Node* matmul(Node* a, Node* b) {
  return a->graph->make(a->val * b->val, rg(a, b), [a, b](const Node& out) {
    if (a->requires_grad) a->add_grad(out.grad * b->val.transpose());
    if (b->requires_grad) b->add_grad(a->val.transpose() * out.grad);
  });
}

Node* transpose(Node* a) {
  return a->graph->make(a->val.transpose(), rg(a), [a](const Node& out) {
    a->add_grad(out.grad.transpose());
  });
}

Node* relu(Node* a) {
  return a->graph->make(a->val.cwiseMax(0.0), rg(a), [a](const Node& out) {
    a->add_grad(out.grad.cwiseProduct((a->val.array() > 0.0).cast<double>().matrix()));
  });
}

Node* sigmoid(Node* a) {
  Mat y = (1.0 / (1.0 + (-a->val.array()).exp())).matrix();
  return a->graph->make(y, rg(a), [a](const Node& out) {
    Mat d = out.val.array() * (1.0 - out.val.array());
    a->add_grad(out.grad.cwiseProduct(d));
  });
}

Node* exp(Node* a) {
  return a->graph->make(a->val.array().exp().matrix(), rg(a), [a](const Node& out) {
    a->add_grad(out.grad.cwiseProduct(out.val));
  });
}

Node* concat_rows(const std::vector<Node*>& parts) {
  int rows = 0;
  bool need = false;
  for (Node* p : parts) {
    rows += static_cast<int>(p->val.rows());
    need = need || p->requires_grad;
  }
  Mat v(rows, parts[0]->val.cols());
  int at = 0;
  for (Node* p : parts) {
    v.middleRows(at, p->val.rows()) = p->val;
    at += static_cast<int>(p->val.rows());
  }
  auto ps = parts;
  return parts[0]->graph->make(std::move(v), need, [ps](const Node& out) {
    int at = 0;
    for (Node* p : ps) {
      int r = static_cast<int>(p->val.rows());
      if (p->requires_grad) p->add_grad(out.grad.middleRows(at, r));
      at += r;
    }
  });
}

Node* slice_rows(Node* a, int start, int count) {
  return a->graph->make(a->val.middleRows(start, count), rg(a),
                        [a, start, count](const Node& out) {
                          Mat g = Mat::Zero(a->val.rows(), a->val.cols());
                          g.middleRows(start, count) = out.grad;
                          a->add_grad(g);
                        });
}

Node* select_rows(Node* a, const std::vector<int>& idx) {
  Mat v(idx.size(), a->val.cols());
  for (size_t i = 0; i < idx.size(); ++i) v.row(i) = a->val.row(idx[i]);
  return a->graph->make(std::move(v), rg(a), [a, idx](const Node& out) {
    Mat g = Mat::Zero(a->val.rows(), a->val.cols());
    for (size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += out.grad.row(i);
    a->add_grad(g);
  });
}

Node* sum_all(Node* a) {
  Mat v(1, 1);
  v(0, 0) = a->val.sum();
  return a->graph->make(v, rg(a), [a](const Node& out) {
    a->add_grad(Mat::Constant(a->val.rows(), a->val.cols(), out.grad(0, 0)));
  });
}

Node* mean_all(Node* a) { return scale(sum_all(a), 1.0 / a->val.size()); }

Node* scale_by(Node* s, Node* a) {
  return a->graph->make(a->val * s->val(0, 0), rg(s, a), [s, a](const Node& out) {
    if (a->requires_grad) a->add_grad(out.grad * s->val(0, 0));
    if (s->requires_grad) {
      Mat g(1, 1);
      g(0, 0) = out.grad.cwiseProduct(a->val).sum();
      s->add_grad(g);
    }
  });
}

Node* softmax_rows(Node* a, const Mat* add_mask) {
  Mat z = a->val;
  if (add_mask) z += *add_mask;
  Mat y(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - m).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  return a->graph->make(std::move(y), rg(a), [a](const Node& out) {
    Mat g(out.val.rows(), out.val.cols());
    for (int i = 0; i < out.val.rows(); ++i) {
      double dot = out.grad.row(i).dot(out.val.row(i));
      g.row(i) = out.val.row(i).cwiseProduct(out.grad.row(i) - Mat::Constant(1, out.val.cols(), dot));
    }
    a->add_grad(g);
  });
}

Node* layernorm_rows(Node* a, Node* gamma, Node* beta, double eps) {
  const int rows = static_cast<int>(a->val.rows());
  const int cols = static_cast<int>(a->val.cols());
  Mat xhat(rows, cols);
  Vec inv_sigma(rows);
  for (int i = 0; i < rows; ++i) {
    double mu = a->val.row(i).mean();
    double var = (a->val.row(i).array() - mu).square().mean();
    inv_sigma(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (a->val.row(i).array() - mu).matrix() * inv_sigma(i);
  }
  Mat y = xhat;
  for (int i = 0; i < rows; ++i)
    y.row(i) = xhat.row(i).cwiseProduct(gamma->val.row(0)) + beta->val.row(0);
  bool need = a->requires_grad || gamma->requires_grad || beta->requires_grad;
  auto xh = std::make_shared<Mat>(std::move(xhat));
  auto is = std::make_shared<Vec>(std::move(inv_sigma));
  return a->graph->make(std::move(y), need, [a, gamma, beta, xh, is](const Node& out) {
    const int rows = static_cast<int>(out.val.rows());
    const int cols = static_cast<int>(out.val.cols());
    if (gamma->requires_grad) gamma->add_grad(out.grad.cwiseProduct(*xh).colwise().sum());
    if (beta->requires_grad) beta->add_grad(out.grad.colwise().sum());
    if (a->requires_grad) {
      Mat g(rows, cols);
      for (int i = 0; i < rows; ++i) {
        Eigen::RowVectorXd dxhat = out.grad.row(i).cwiseProduct(gamma->val.row(0));
        double m1 = dxhat.mean();
        double m2 = dxhat.cwiseProduct(xh->row(i)).mean();
        g.row(i) = (*is)(i) * (dxhat.array() - m1 - xh->row(i).array() * m2).matrix();
      }
      a->add_grad(g);
    }
  });
}

Node* l2_normalize_rows(Node* a, double eps) {
  const int rows = static_cast<int>(a->val.rows());
  Vec norms(rows);
  Mat y(rows, a->val.cols());
  for (int i = 0; i < rows; ++i) {
    norms(i) = std::max(a->val.row(i).norm(), eps);
    y.row(i) = a->val.row(i) / norms(i);
  }
  auto ns = std::make_shared<Vec>(std::move(norms));
  return a->graph->make(std::move(y), rg(a), [a, ns, eps](const Node& out) {
    Mat g(out.val.rows(), out.val.cols());
    for (int i = 0; i < out.val.rows(); ++i) {
      double n = (*ns)(i);
      if (a->val.row(i).norm() < eps) {
        g.row(i) = out.grad.row(i) / eps;
      } else {
        double dot = out.grad.row(i).dot(a->val.row(i));
        g.row(i) = out.grad.row(i) / n - a->val.row(i) * (dot / (n * n * n));
      }
    }
    a->add_grad(g);
  });
}

Node* gather_patches(Node* a, std::shared_ptr<const std::vector<int>> row_index, int taps) {
  const int cin = static_cast<int>(a->val.cols());
  const int out_rows = static_cast<int>(row_index->size()) / taps;
  Mat v(out_rows, taps * cin);
  for (int r = 0; r < out_rows; ++r)
    for (int t = 0; t < taps; ++t)
      v.block(r, t * cin, 1, cin) = a->val.row((*row_index)[static_cast<size_t>(r) * taps + t]);
  return a->graph->make(std::move(v), rg(a), [a, row_index, taps, cin](const Node& out) {
    Mat g = Mat::Zero(a->val.rows(), a->val.cols());
    const int out_rows = static_cast<int>(out.val.rows());
    for (int r = 0; r < out_rows; ++r)
      for (int t = 0; t < taps; ++t)
        g.row((*row_index)[static_cast<size_t>(r) * taps + t]) += out.grad.block(r, t * cin, 1, cin);
    a->add_grad(g);
  });
}

Node* interp(Node* a, std::shared_ptr<const InterpPlan> plan) {
  Mat v = apply_interp(*plan, a->val);
  return a->graph->make(std::move(v), rg(a), [a, plan](const Node& out) {
    Mat g = Mat::Zero(a->val.rows(), a->val.cols());
    const int out_px = plan->dst_h * plan->dst_w;
    for (int p = 0; p < out_px; ++p) {
      size_t base = static_cast<size_t>(p) * 4;
      for (int t = 0; t < 4; ++t)
        g.row(plan->src_index[base + t]) += plan->src_weight[base + t] * out.grad.row(p);
    }
    a->add_grad(g);
  });
}

Node* bce_with_logits_mean(Node* logits, const Mat& targets) {
  const Mat& x = logits->val;
  double total = 0.0;
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) {
      double v = x(i, j), t = targets(i, j);
      total += std::max(v, 0.0) - v * t + std::log1p(std::exp(-std::abs(v)));
    }
  Mat out(1, 1);
  const double inv_n = 1.0 / x.size();
  out(0, 0) = total * inv_n;
  Mat tg = targets;
  return logits->graph->make(out, rg(logits), [logits, tg, inv_n](const Node& o) {
    Mat p = (1.0 / (1.0 + (-logits->val.array()).exp())).matrix();
    logits->add_grad((p - tg) * (o.grad(0, 0) * inv_n));
  });
}

Node* dice_loss_mean(Node* logits, const Mat& targets, double eps) {
  const int rows = static_cast<int>(logits->val.rows());
  Mat p = (1.0 / (1.0 + (-logits->val.array()).exp())).matrix();
  Vec num(rows), den(rows);
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    double a = p.row(i).dot(targets.row(i));
    double b = p.row(i).sum() + targets.row(i).sum();
    num(i) = 2.0 * a + eps;
    den(i) = b + eps;
    total += 1.0 - num(i) / den(i);
  }
  Mat out(1, 1);
  out(0, 0) = total / rows;
  Mat tg = targets;
  auto pn = std::make_shared<Mat>(std::move(p));
  auto nm = std::make_shared<Vec>(std::move(num));
  auto dn = std::make_shared<Vec>(std::move(den));
  return logits->graph->make(out, rg(logits), [logits, tg, pn, nm, dn, rows](const Node& o) {
    Mat g(logits->val.rows(), logits->val.cols());
    for (int i = 0; i < rows; ++i) {
      // d/dp of -(2*A+eps)/(B+eps): -(2*g*(B+eps) - (2A+eps)) / (B+eps)^2
      double d = (*dn)(i);
      for (int j = 0; j < g.cols(); ++j) {
        double dLdp = -(2.0 * tg(i, j) * d - (*nm)(i)) / (d * d);
        double pij = (*pn)(i, j);
        g(i, j) = dLdp * pij * (1.0 - pij);
      }
    }
    logits->add_grad(g * (o.grad(0, 0) / rows));
  });
}

Node* cross_entropy_logits_mean(Node* logits, const std::vector<int>& targets) {
  const Mat& x = logits->val;
  const int rows = static_cast<int>(x.rows());
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    double m = x.row(i).maxCoeff();
    double lse = m + std::log((x.row(i).array() - m).exp().sum());
    total += lse - x(i, targets[i]);
  }
  Mat out(1, 1);
  out(0, 0) = total / rows;
  return logits->graph->make(out, rg(logits), [logits, targets, rows](const Node& o) {
    Mat g(logits->val.rows(), logits->val.cols());
    for (int i = 0; i < rows; ++i) {
      double m = logits->val.row(i).maxCoeff();
      Eigen::ArrayXd e = (logits->val.row(i).array() - m).exp();
      g.row(i) = (e / e.sum()).matrix();
      g(i, targets[i]) -= 1.0;
    }
    logits->add_grad(g * (o.grad(0, 0) / rows));
  });
}

}  // namespace ovseg::ag
