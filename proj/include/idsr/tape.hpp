#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "idsr/common.hpp"

namespace idsr {

// Reverse-mode autodiff over Eigen matrices. Operations append nodes to a
// tape; backward() walks the tape in reverse. Parameters reference external
// value/grad storage so the optimizer sees accumulated gradients without
// copies. Gradients of interior nodes are allocated lazily on first touch.
class Tape {
 public:
  struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
  };

  void reset() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  // When recording is off, nodes carry values only (no backward closures);
  // use for evaluation passes.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  const Mat& val(Var v) const { return nodes_[v.i].val(); }

  Var leaf(Mat m) { return push(std::move(m)); }

  Var scalar(real x) {
    Mat m(1, 1);
    m(0, 0) = x;
    return push(std::move(m));
  }

  // value/grad live outside the tape; grad must be pre-sized and zeroed by
  // the caller before accumulation.
  Var param(const Mat& value, Mat& grad) {
    Node n;
    n.pvalue = &value;
    n.pgrad = &grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  // row of an external matrix as a column vector (embedding lookup)
  Var row_embed(const Mat& table, Mat& table_grad, int row) {
    Var out = push(table.row(row).transpose());
    if (recording_) {
      Mat* pg = &table_grad;
      set_back(out, [out, pg, row](Tape& t) {
        pg->row(row) += t.grad_ref(out.i).transpose();
      });
    }
    return out;
  }

  Var add(Var a, Var b) {
    Var out = push(val(a) + val(b));
    if (recording_)
      set_back(out, [out, a, b](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        t.grad_ref(a.i) += g;
        t.grad_ref(b.i) += g;
      });
    return out;
  }

  Var sub(Var a, Var b) {
    Var out = push(val(a) - val(b));
    if (recording_)
      set_back(out, [out, a, b](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        t.grad_ref(a.i) += g;
        t.grad_ref(b.i) -= g;
      });
    return out;
  }

  Var neg(Var a) {
    Var out = push(-val(a));
    if (recording_)
      set_back(out, [out, a](Tape& t) { t.grad_ref(a.i) -= t.grad_ref(out.i); });
    return out;
  }

  // elementwise product
  Var cmul(Var a, Var b) {
    Var out = push(val(a).cwiseProduct(val(b)));
    if (recording_)
      set_back(out, [out, a, b](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        t.grad_ref(a.i) += g.cwiseProduct(t.val(b));
        t.grad_ref(b.i) += g.cwiseProduct(t.val(a));
      });
    return out;
  }

  // matrix product
  Var mul(Var a, Var b) {
    Var out = push(val(a) * val(b));
    if (recording_)
      set_back(out, [out, a, b](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        t.grad_ref(a.i) += g * t.val(b).transpose();
        t.grad_ref(b.i) += t.val(a).transpose() * g;
      });
    return out;
  }

  Var transpose(Var a) {
    Var out = push(val(a).transpose());
    if (recording_)
      set_back(out, [out, a](Tape& t) {
        t.grad_ref(a.i) += t.grad_ref(out.i).transpose();
      });
    return out;
  }

  Var scale(Var a, real c) {
    Var out = push(val(a) * c);
    if (recording_)
      set_back(out, [out, a, c](Tape& t) {
        t.grad_ref(a.i) += c * t.grad_ref(out.i);
      });
    return out;
  }

  Var add_const(Var a, real c) {
    Var out = push(val(a).array() + c);
    if (recording_)
      set_back(out, [out, a](Tape& t) { t.grad_ref(a.i) += t.grad_ref(out.i); });
    return out;
  }

  // scalar var (1x1) times matrix
  Var smul(Var s, Var a) {
    Var out = push(val(s)(0, 0) * val(a));
    if (recording_)
      set_back(out, [out, s, a](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        t.grad_ref(s.i)(0, 0) += g.cwiseProduct(t.val(a)).sum();
        t.grad_ref(a.i) += t.val(s)(0, 0) * g;
      });
    return out;
  }

  // elementwise quotient
  Var div(Var a, Var b) {
    Var out = push(val(a).cwiseQuotient(val(b)));
    if (recording_)
      set_back(out, [out, a, b](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        const Mat& bv = t.val(b);
        t.grad_ref(a.i) += g.cwiseQuotient(bv);
        t.grad_ref(b.i) -=
            g.cwiseProduct(t.val(a)).cwiseQuotient(bv.cwiseProduct(bv));
      });
    return out;
  }

  Var log_(Var a) {
    Var out = push(val(a).array().log());
    if (recording_)
      set_back(out, [out, a](Tape& t) {
        t.grad_ref(a.i).array() +=
            t.grad_ref(out.i).array() / t.val(a).array();
      });
    return out;
  }

  Var sigmoid(Var a) {
    Var out = push((1.0 / (1.0 + (-val(a).array()).exp())).matrix());
    if (recording_)
      set_back(out, [out, a](Tape& t) {
        const auto& y = t.val(out).array();
        t.grad_ref(a.i).array() += t.grad_ref(out.i).array() * y * (1.0 - y);
      });
    return out;
  }

  Var tanh_(Var a) {
    Var out = push(val(a).array().tanh());
    if (recording_)
      set_back(out, [out, a](Tape& t) {
        const auto& y = t.val(out).array();
        t.grad_ref(a.i).array() += t.grad_ref(out.i).array() * (1.0 - y * y);
      });
    return out;
  }

  // column-vector softmax, max-subtracted for stability
  Var softmax(Var a) {
    const Mat& x = val(a);
    Mat y = (x.array() - x.maxCoeff()).exp();
    y /= y.sum();
    Var out = push(std::move(y));
    if (recording_)
      set_back(out, [out, a](Tape& t) {
        const auto& y2 = t.val(out).array();
        const auto& g = t.grad_ref(out.i).array();
        real s = (g * y2).sum();
        t.grad_ref(a.i).array() += (g - s) * y2;
      });
    return out;
  }

  Var sum(Var a) {
    Mat m(1, 1);
    m(0, 0) = val(a).sum();
    Var out = push(std::move(m));
    if (recording_)
      set_back(out, [out, a](Tape& t) {
        t.grad_ref(a.i).array() += t.grad_ref(out.i)(0, 0);
      });
    return out;
  }

  // inner product of two column vectors
  Var dot(Var a, Var b) {
    Mat m(1, 1);
    m(0, 0) = val(a).col(0).dot(val(b).col(0));
    Var out = push(std::move(m));
    if (recording_)
      set_back(out, [out, a, b](Tape& t) {
        real g = t.grad_ref(out.i)(0, 0);
        t.grad_ref(a.i) += g * t.val(b);
        t.grad_ref(b.i) += g * t.val(a);
      });
    return out;
  }

  // single entry as 1x1
  Var at(Var a, int r, int c = 0) {
    Mat m(1, 1);
    m(0, 0) = val(a)(r, c);
    Var out = push(std::move(m));
    if (recording_)
      set_back(out, [out, a, r, c](Tape& t) {
        t.grad_ref(a.i)(r, c) += t.grad_ref(out.i)(0, 0);
      });
    return out;
  }

  // vertical concat of two column vectors
  Var concat2(Var a, Var b) {
    const Mat& av = val(a);
    const Mat& bv = val(b);
    Mat m(av.rows() + bv.rows(), 1);
    m.topRows(av.rows()) = av;
    m.bottomRows(bv.rows()) = bv;
    int ra = static_cast<int>(av.rows());
    int rb = static_cast<int>(bv.rows());
    Var out = push(std::move(m));
    if (recording_)
      set_back(out, [out, a, b, ra, rb](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        t.grad_ref(a.i) += g.topRows(ra);
        t.grad_ref(b.i) += g.bottomRows(rb);
      });
    return out;
  }

  // column vectors side by side -> d x n
  Var concat_cols(const std::vector<Var>& cols) {
    Mat m(val(cols[0]).rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) m.col(k) = val(cols[k]).col(0);
    Var out = push(std::move(m));
    if (recording_) {
      std::vector<int> idx(cols.size());
      for (std::size_t k = 0; k < cols.size(); ++k) idx[k] = cols[k].i;
      set_back(out, [out, idx = std::move(idx)](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        for (std::size_t k = 0; k < idx.size(); ++k)
          t.grad_ref(idx[k]) += g.col(static_cast<Eigen::Index>(k));
      });
    }
    return out;
  }

  // 1x1 vars stacked into a column vector
  Var stack_scalars(const std::vector<Var>& xs) {
    Mat m(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t k = 0; k < xs.size(); ++k) m(k, 0) = val(xs[k])(0, 0);
    Var out = push(std::move(m));
    if (recording_) {
      std::vector<int> idx(xs.size());
      for (std::size_t k = 0; k < xs.size(); ++k) idx[k] = xs[k].i;
      set_back(out, [out, idx = std::move(idx)](Tape& t) {
        const Mat& g = t.grad_ref(out.i);
        for (std::size_t k = 0; k < idx.size(); ++k)
          t.grad_ref(idx[k])(0, 0) += g(static_cast<Eigen::Index>(k), 0);
      });
    }
    return out;
  }

  // Seeds root with ones and propagates. Nodes recorded after root are
  // untouched.
  void backward(Var root) {
    grad_ref(root.i).setOnes();
    for (int i = root.i; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && has_grad(i)) n.back(*this);
    }
  }

  // Lazily-allocated gradient for node i (external storage for params).
  Mat& grad_ref(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.pgrad) return *n.pgrad;
    if (!n.grad_set) {
      n.grad = Mat::Zero(n.val().rows(), n.val().cols());
      n.grad_set = true;
    }
    return n.grad;
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    const Mat* pvalue = nullptr;
    Mat* pgrad = nullptr;
    bool grad_set = false;
    std::function<void(Tape&)> back;
    const Mat& val() const { return pvalue ? *pvalue : value; }
  };

  Var push(Mat value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_back(Var v, std::function<void(Tape&)> f) {
    nodes_[static_cast<std::size_t>(v.i)].back = std::move(f);
  }

  bool has_grad(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    return n.pgrad != nullptr || n.grad_set;
  }

  std::vector<Node> nodes_;
  bool recording_ = true;
};

using Var = Tape::Var;

}  // namespace idsr
