// src/avw/tape.h
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
//
// Reverse-mode autodiff over dense double matrices. A Tape is built fresh
// per forward pass; nodes are created in topological order, Backward walks
// them in reverse. Parameter leaves accumulate into their Param's grad
// buffer, so one tape can sum gradients over several utterances and several
// loss terms.

#ifndef AVWHISPER_TAPE_H_
#define AVWHISPER_TAPE_H_

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace avw::nn {

using Mat = Eigen::MatrixXd;

/// A named trainable tensor plus its gradient and Adam state. `stage` labels
/// the training-stage partition that owns the parameter.
struct Param {
  std::string name;
  int stage = 1;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape {
 public:
  /// Constant leaf; never receives gradient.
  int Leaf(Mat value);
  /// Parameter leaf; Backward adds into p->grad (sized on demand).
  int LeafParam(Param* p);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  int Add(int a, int b);
  /// a (T x C) + row-broadcast bias (1 x C).
  int AddRowBroadcast(int a, int bias);
  int Matmul(int a, int b);
  /// A * B^T (used for attention scores and tied output projections).
  int MatmulNT(int a, int b);
  int Scale(int a, double s);
  /// Elementwise product with a 1x1 scalar node (gating).
  int ScaleByScalarNode(int a, int scalar);
  int Tanh(int a);
  int Relu(int a);
  int Gelu(int a);
  /// Row-wise softmax; with `causal`, entries at column > row are masked out.
  int SoftmaxRows(int a, bool causal);
  /// Row-wise layer norm with gain/bias rows (1 x C), eps 1e-5.
  int LayerNorm(int x, int gain, int bias);
  /// Gather rows of a (table) node by index: embedding lookup.
  int Rows(int table, const std::vector<int>& ids);
  int Cols(int a, int col0, int ncols);
  int HCat(const std::vector<int>& parts);
  /// (T x C) -> (T_out x kernel*C) frame unfolding with zero padding;
  /// T_out = floor((T + 2*pad - kernel) / stride) + 1.
  int Unfold1d(int a, int kernel, int stride, int pad);
  /// Summed token cross entropy over rows whose target != ignore_id; the
  /// number of counted rows is written to *out_count. Returns a 1x1 node.
  int CrossEntropyRows(int logits, const std::vector<int>& targets,
                       int ignore_id, int* out_count);
  int Zero11();

  /// Zeroes node gradients, seeds d(root)=1 and propagates to parameter
  /// grads. root must be 1x1. May be called repeatedly on one tape (each
  /// call re-accumulates parameter grads for its own root).
  void Backward(int root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Param* param = nullptr;
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  Mat& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  int Emit(Mat value, bool needs_grad, std::function<void(Tape&)> backward);

  std::vector<Node> nodes_;
};

}  // namespace avw::nn

#endif  // AVWHISPER_TAPE_H_
