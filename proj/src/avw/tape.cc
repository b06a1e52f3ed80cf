// src/avw/tape.cc
//
// Copyright 2026 The avwhisper Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avw/tape.h"

#include <cmath>

#include "avw/util.h"

namespace avw::nn {

namespace {
constexpr double kLnEps = 1e-5;  // layer norm epsilon
}

int Tape::Emit(Mat value, bool needs_grad, std::function<void(Tape&)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::Leaf(Mat value) { return Emit(std::move(value), false, nullptr); }

int Tape::LeafParam(Param* p) {
  Node n;
  n.value = p->value;
  n.param = p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::Add(int a, int b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols())
    Throw(ErrorCode::kInvalidArg, "Add: shape mismatch");
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int id = Emit(va + vb, ng, nullptr);
  if (ng)
    node(id).backward = [id, a, b](Tape& t) {
      if (t.node(a).needs_grad) t.grad(a) += t.grad(id);
      if (t.node(b).needs_grad) t.grad(b) += t.grad(id);
    };
  return id;
}

int Tape::AddRowBroadcast(int a, int bias) {
  const Mat& va = value(a);
  const Mat& vb = value(bias);
  if (vb.rows() != 1 || vb.cols() != va.cols())
    Throw(ErrorCode::kInvalidArg, "AddRowBroadcast: bias must be 1 x cols(a)");
  const bool ng = node(a).needs_grad || node(bias).needs_grad;
  Mat out = va;
  out.rowwise() += vb.row(0);
  const int id = Emit(std::move(out), ng, nullptr);
  if (ng)
    node(id).backward = [id, a, bias](Tape& t) {
      if (t.node(a).needs_grad) t.grad(a) += t.grad(id);
      if (t.node(bias).needs_grad)
        t.grad(bias).row(0) += t.grad(id).colwise().sum();
    };
  return id;
}

int Tape::Matmul(int a, int b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.cols() != vb.rows())
    Throw(ErrorCode::kInvalidArg, "Matmul: inner dimension mismatch");
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int id = Emit(va * vb, ng, nullptr);
  if (ng)
    node(id).backward = [id, a, b](Tape& t) {
      const Mat& g = t.grad(id);
      if (t.node(a).needs_grad) t.grad(a) += g * t.value(b).transpose();
      if (t.node(b).needs_grad) t.grad(b) += t.value(a).transpose() * g;
    };
  return id;
}

int Tape::MatmulNT(int a, int b) {
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.cols() != vb.cols())
    Throw(ErrorCode::kInvalidArg, "MatmulNT: column dimension mismatch");
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int id = Emit(va * vb.transpose(), ng, nullptr);
  if (ng)
    node(id).backward = [id, a, b](Tape& t) {
      const Mat& g = t.grad(id);
      if (t.node(a).needs_grad) t.grad(a) += g * t.value(b);
      if (t.node(b).needs_grad) t.grad(b) += g.transpose() * t.value(a);
    };
  return id;
}

int Tape::Scale(int a, double s) {
  const bool ng = node(a).needs_grad;
  const int id = Emit(value(a) * s, ng, nullptr);
  if (ng)
    node(id).backward = [id, a, s](Tape& t) {
      t.grad(a) += t.grad(id) * s;
    };
  return id;
}

int Tape::ScaleByScalarNode(int a, int scalar) {
  const Mat& vs = value(scalar);
  if (vs.rows() != 1 || vs.cols() != 1)
    Throw(ErrorCode::kInvalidArg, "ScaleByScalarNode: scalar must be 1x1");
  const bool ng = node(a).needs_grad || node(scalar).needs_grad;
  const int id = Emit(value(a) * vs(0, 0), ng, nullptr);
  if (ng)
    node(id).backward = [id, a, scalar](Tape& t) {
      const Mat& g = t.grad(id);
      if (t.node(a).needs_grad) t.grad(a) += g * t.value(scalar)(0, 0);
      if (t.node(scalar).needs_grad)
        t.grad(scalar)(0, 0) += (g.array() * t.value(a).array()).sum();
    };
  return id;
}

int Tape::Tanh(int a) {
  const bool ng = node(a).needs_grad;
  Mat y = value(a).array().tanh().matrix();
  const int id = Emit(std::move(y), ng, nullptr);
  if (ng)
    node(id).backward = [id, a](Tape& t) {
      t.grad(a).array() +=
          t.grad(id).array() * (1.0 - t.value(id).array().square());
    };
  return id;
}

int Tape::Relu(int a) {
  const bool ng = node(a).needs_grad;
  Mat y = value(a).array().max(0.0).matrix();
  const int id = Emit(std::move(y), ng, nullptr);
  if (ng)
    node(id).backward = [id, a](Tape& t) {
      t.grad(a).array() +=
          t.grad(id).array() * (t.value(a).array() > 0.0).cast<double>();
    };
  return id;
}

int Tape::Gelu(int a) {
  const bool ng = node(a).needs_grad;
  const Mat& x = value(a);
  Mat y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = x(i);
    y(i) = 0.5 * v * (1.0 + std::erf(v / M_SQRT2));
  }
  const int id = Emit(std::move(y), ng, nullptr);
  if (ng)
    node(id).backward = [id, a](Tape& t) {
      const Mat& x = t.value(a);
      Mat& ga = t.grad(a);
      const Mat& g = t.grad(id);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x(i);
        const double cdf = 0.5 * (1.0 + std::erf(v / M_SQRT2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
        ga(i) += g(i) * (cdf + v * pdf);
      }
    };
  return id;
}

int Tape::SoftmaxRows(int a, bool causal) {
  const Mat& x = value(a);
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::Index limit = causal ? std::min<Eigen::Index>(r + 1, x.cols())
                                      : x.cols();
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < limit; ++c) mx = std::max(mx, x(r, c));
    double sum = 0.0;
    for (Eigen::Index c = 0; c < limit; ++c) {
      y(r, c) = std::exp(x(r, c) - mx);
      sum += y(r, c);
    }
    for (Eigen::Index c = 0; c < limit; ++c) y(r, c) /= sum;
    for (Eigen::Index c = limit; c < x.cols(); ++c) y(r, c) = 0.0;
  }
  const bool ng = node(a).needs_grad;
  const int id = Emit(std::move(y), ng, nullptr);
  if (ng)
    node(id).backward = [id, a](Tape& t) {
      const Mat& y = t.value(id);
      const Mat& g = t.grad(id);
      Mat& ga = t.grad(a);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = (g.row(r).array() * y.row(r).array()).sum();
        ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
      }
    };
  return id;
}

int Tape::LayerNorm(int x, int gain, int bias) {
  const Mat& v = value(x);
  const Mat& gw = value(gain);
  const Mat& bw = value(bias);
  if (gw.rows() != 1 || gw.cols() != v.cols() || bw.rows() != 1 ||
      bw.cols() != v.cols())
    Throw(ErrorCode::kInvalidArg, "LayerNorm: gain/bias must be 1 x cols(x)");
  Mat xhat(v.rows(), v.cols());
  Eigen::VectorXd inv_std(v.rows());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mean = v.row(r).mean();
    const double var = (v.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std(r) = is;
    xhat.row(r) = (v.row(r).array() - mean) * is;
  }
  Mat y = xhat;
  y.array().rowwise() *= gw.row(0).array();
  y.rowwise() += bw.row(0);
  const bool ng =
      node(x).needs_grad || node(gain).needs_grad || node(bias).needs_grad;
  const int id = Emit(std::move(y), ng, nullptr);
  if (ng)
    node(id).backward = [id, x, gain, bias, xhat = std::move(xhat),
                         inv_std = std::move(inv_std)](Tape& t) {
      const Mat& g = t.grad(id);
      if (t.node(bias).needs_grad)
        t.grad(bias).row(0) += g.colwise().sum();
      if (t.node(gain).needs_grad)
        t.grad(gain).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
      if (t.node(x).needs_grad) {
        using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
        const RowArray gw = t.value(gain).row(0).array();
        Mat& gx = t.grad(x);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const RowArray dxhat = g.row(r).array() * gw;
          const double m1 = dxhat.mean();
          const double m2 = (dxhat * xhat.row(r).array()).mean();
          gx.row(r).array() +=
              (dxhat - m1 - xhat.row(r).array() * m2) * inv_std(r);
        }
      }
    };
  return id;
}

int Tape::Rows(int table, const std::vector<int>& ids) {
  const Mat& tab = value(table);
  Mat out(static_cast<Eigen::Index>(ids.size()), tab.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tab.rows())
      Throw(ErrorCode::kInvalidArg, "Rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = tab.row(ids[i]);
  }
  const bool ng = node(table).needs_grad;
  const int id = Emit(std::move(out), ng, nullptr);
  if (ng)
    node(id).backward = [id, table, ids](Tape& t) {
      const Mat& g = t.grad(id);
      Mat& gt = t.grad(table);
      for (std::size_t i = 0; i < ids.size(); ++i)
        gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  return id;
}

int Tape::Cols(int a, int col0, int ncols) {
  const Mat& v = value(a);
  if (col0 < 0 || ncols <= 0 || col0 + ncols > v.cols())
    Throw(ErrorCode::kInvalidArg, "Cols: slice out of range");
  const bool ng = node(a).needs_grad;
  const int id = Emit(v.middleCols(col0, ncols), ng, nullptr);
  if (ng)
    node(id).backward = [id, a, col0, ncols](Tape& t) {
      t.grad(a).middleCols(col0, ncols) += t.grad(id);
    };
  return id;
}

int Tape::HCat(const std::vector<int>& parts) {
  if (parts.empty()) Throw(ErrorCode::kInvalidArg, "HCat: empty part list");
  Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool ng = false;
  for (int p : parts) {
    if (value(p).rows() != rows)
      Throw(ErrorCode::kInvalidArg, "HCat: row count mismatch");
    cols += value(p).cols();
    ng = ng || node(p).needs_grad;
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (int p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  const int id = Emit(std::move(out), ng, nullptr);
  if (ng)
    node(id).backward = [id, parts](Tape& t) {
      Eigen::Index at = 0;
      for (int p : parts) {
        const Eigen::Index w = t.value(p).cols();
        if (t.node(p).needs_grad) t.grad(p) += t.grad(id).middleCols(at, w);
        at += w;
      }
    };
  return id;
}

int Tape::Unfold1d(int a, int kernel, int stride, int pad) {
  const Mat& v = value(a);
  const Eigen::Index t_in = v.rows();
  const Eigen::Index c = v.cols();
  const Eigen::Index t_out = (t_in + 2 * pad - kernel) / stride + 1;
  if (t_out <= 0)
    Throw(ErrorCode::kInvalidArg, "Unfold1d: input too short for kernel");
  Mat out = Mat::Zero(t_out, kernel * c);
  for (Eigen::Index to = 0; to < t_out; ++to)
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index ti = to * stride - pad + k;
      if (ti < 0 || ti >= t_in) continue;
      out.row(to).segment(k * c, c) = v.row(ti);
    }
  const bool ng = node(a).needs_grad;
  const int id = Emit(std::move(out), ng, nullptr);
  if (ng)
    node(id).backward = [id, a, kernel, stride, pad](Tape& t) {
      const Mat& g = t.grad(id);
      Mat& ga = t.grad(a);
      const Eigen::Index c = ga.cols();
      for (Eigen::Index to = 0; to < g.rows(); ++to)
        for (int k = 0; k < kernel; ++k) {
          const Eigen::Index ti = to * stride - pad + k;
          if (ti < 0 || ti >= ga.rows()) continue;
          ga.row(ti) += g.row(to).segment(k * c, c);
        }
    };
  return id;
}

int Tape::CrossEntropyRows(int logits, const std::vector<int>& targets,
                           int ignore_id, int* out_count) {
  const Mat& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    Throw(ErrorCode::kInvalidArg, "CrossEntropyRows: one target per row");
  Mat probs(z.rows(), z.cols());
  double total = 0.0;
  int count = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt == ignore_id) {
      probs.row(r).setZero();
      continue;
    }
    if (tgt < 0 || tgt >= z.cols())
      Throw(ErrorCode::kInvalidArg, "CrossEntropyRows: target out of vocab");
    const double mx = z.row(r).maxCoeff();
    const Eigen::ArrayXd e = (z.row(r).array() - mx).exp();
    const double sum = e.sum();
    probs.row(r) = (e / sum).matrix();
    total += std::log(sum) + mx - z(r, tgt);
    ++count;
  }
  if (out_count) *out_count = count;
  const bool ng = node(logits).needs_grad;
  Mat loss(1, 1);
  loss(0, 0) = total;
  const int id = Emit(std::move(loss), ng, nullptr);
  if (ng)
    node(id).backward = [id, logits, targets, ignore_id,
                         probs = std::move(probs)](Tape& t) {
      const double g = t.grad(id)(0, 0);
      Mat& gz = t.grad(logits);
      for (Eigen::Index r = 0; r < gz.rows(); ++r) {
        const int tgt = targets[static_cast<std::size_t>(r)];
        if (tgt == ignore_id) continue;
        gz.row(r) += g * probs.row(r);
        gz(r, tgt) -= g;
      }
    };
  return id;
}

int Tape::Zero11() { return Leaf(Mat::Zero(1, 1)); }

void Tape::Backward(int root) {
  if (root < 0 || root >= static_cast<int>(nodes_.size()))
    Throw(ErrorCode::kInvalidArg, "Backward: bad root id");
  if (value(root).rows() != 1 || value(root).cols() != 1)
    Throw(ErrorCode::kInvalidArg, "Backward: root must be a 1x1 scalar");
  for (auto& n : nodes_) {
    if (!n.needs_grad) continue;
    n.grad.setZero(n.value.rows(), n.value.cols());
  }
  if (!node(root).needs_grad) return;  // no parameters feed the root
  grad(root)(0, 0) = 1.0;
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this);
    if (n.param) {
      if (n.param->grad.size() == 0) n.param->ZeroGrad();
      n.param->grad += n.grad;
    }
  }
}

}  // namespace avw::nn
