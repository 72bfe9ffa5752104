#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "atg/tensor.hpp"

namespace atg {

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeMismatch, what);
}

/// out = a * b, each output element accumulated over k in ascending order. The
/// result for a row depends only on that row of `a`, so computing a prefix
/// row-by-row reproduces the batched result bit for bit.
template <typename Scalar>
Matrix<Scalar> rowwise_product(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  Matrix<Scalar> out = Matrix<Scalar>::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    auto row = out.row(i);
    for (Eigen::Index k = 0; k < a.cols(); ++k) row.noalias() += a(i, k) * b.row(k);
  }
  return out;
}

/// Left-to-right sum. Forward reductions use it so a row's result does not
/// depend on its memory alignment.
template <typename Derived>
typename Derived::Scalar sequential_sum(const Eigen::DenseBase<Derived>& row) {
  typename Derived::Scalar acc(0);
  for (Eigen::Index j = 0; j < row.size(); ++j) acc += row(j);
  return acc;
}

/// Scalar std::exp on every coefficient (never the vectorized approximation).
template <typename Scalar>
inline Scalar scalar_exp(Scalar v) {
  return std::exp(v);
}

/// Value used in place of -inf for masked logits.
template <typename Scalar>
constexpr Scalar masked_logit() {
  if constexpr (std::is_same_v<Scalar, double>) {
    return -std::numeric_limits<double>::infinity();
  } else {
    return Scalar(-1e9);
  }
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.cols() == b.rows(), "matmul " + a.shape_string() + " * " + b.shape_string());
  return detail::make_result<Scalar>(
      detail::rowwise_product(a.value(), b.value()), {a, b},
      [](Node<Scalar>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) pa.accumulate((self.grad * pb.value.transpose()).eval());
        if (pb.requires_grad) pb.accumulate((pa.value.transpose() * self.grad).eval());
      },
      "matmul");
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  return detail::make_result<Scalar>(
      a.value().transpose(), {a},
      [](Node<Scalar>& self) { self.parents[0]->accumulate(self.grad.transpose()); }, "transpose");
}

/// a + b; b may also be a single row broadcast over the rows of a.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return detail::make_result<Scalar>(
        a.value() + b.value(), {a, b},
        [](Node<Scalar>& self) {
          for (auto& p : self.parents) {
            if (p->requires_grad) p->accumulate(self.grad);
          }
        },
        "add");
  }
  detail::require(b.rows() == 1 && a.cols() == b.cols(), "add " + a.shape_string() + " + " + b.shape_string());
  Matrix<Scalar> out = a.value();
  out.rowwise() += b.value().row(0);
  return detail::make_result<Scalar>(
      std::move(out), {a, b},
      [](Node<Scalar>& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->requires_grad) self.parents[1]->accumulate(self.grad.colwise().sum());
      },
      "add");
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub " + a.shape_string() + " - " + b.shape_string());
  return detail::make_result<Scalar>(
      a.value() - b.value(), {a, b},
      [](Node<Scalar>& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->requires_grad) self.parents[1]->accumulate(-self.grad);
      },
      "sub");
}

/// Elementwise product; b may be a single row broadcast over a.
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const bool broadcast = !(a.rows() == b.rows() && a.cols() == b.cols());
  detail::require(!broadcast || (b.rows() == 1 && a.cols() == b.cols()),
                  "mul " + a.shape_string() + " * " + b.shape_string());
  Matrix<Scalar> out = a.value();
  if (broadcast) {
    out.array().rowwise() *= b.value().row(0).array();
  } else {
    out.array() *= b.value().array();
  }
  return detail::make_result<Scalar>(
      std::move(out), {a, b},
      [broadcast](Node<Scalar>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (broadcast) {
          if (pa.requires_grad) {
            Matrix<Scalar> g = self.grad;
            g.array().rowwise() *= pb.value.row(0).array();
            pa.accumulate(g);
          }
          if (pb.requires_grad) pb.accumulate((self.grad.array() * pa.value.array()).matrix().colwise().sum());
        } else {
          if (pa.requires_grad) pa.accumulate((self.grad.array() * pb.value.array()).matrix());
          if (pb.requires_grad) pb.accumulate((self.grad.array() * pa.value.array()).matrix());
        }
      },
      "mul");
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  return detail::make_result<Scalar>(
      a.value() * s, {a}, [s](Node<Scalar>& self) { self.parents[0]->accumulate(self.grad * s); }, "scale");
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return sub(a, b);
}
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, Scalar s) {
  return scale(a, s);
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::make_result<Scalar>(
      std::move(out), {a},
      [](Node<Scalar>& self) {
        auto& p = *self.parents[0];
        p.accumulate(Matrix<Scalar>::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
      },
      "sum");
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

template <typename Scalar>
Tensor<Scalar> concat_cols(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require(a.rows() == b.rows(), "concat_cols " + a.shape_string() + " | " + b.shape_string());
  Matrix<Scalar> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const auto split = a.cols();
  return detail::make_result<Scalar>(
      std::move(out), {a, b},
      [split](Node<Scalar>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) pa.accumulate(self.grad.leftCols(split));
        if (pb.requires_grad) pb.accumulate(self.grad.rightCols(self.grad.cols() - split));
      },
      "concat_cols");
}

/// Concatenates along the last dimension.
template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  detail::require(!parts.empty(), "concat_cols of nothing");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == parts.front().rows(), "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix<Scalar> out(parts.front().rows(), cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return detail::make_result<Scalar>(
      std::move(out), parts,
      [offsets](Node<Scalar>& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = *self.parents[i];
          if (p.requires_grad) p.accumulate(self.grad.middleCols(offsets[i], p.value.cols()));
        }
      },
      "concat_cols");
}

/// Stacks along the first dimension.
template <typename Scalar>
Tensor<Scalar> vstack(const std::vector<Tensor<Scalar>>& parts) {
  detail::require(!parts.empty(), "vstack of nothing");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == parts.front().cols(), "vstack column mismatch");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, parts.front().cols());
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return detail::make_result<Scalar>(
      std::move(out), parts,
      [offsets](Node<Scalar>& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = *self.parents[i];
          if (p.requires_grad) p.accumulate(self.grad.middleRows(offsets[i], p.value.rows()));
        }
      },
      "vstack");
}

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols out of range");
  return detail::make_result<Scalar>(
      a.value().middleCols(start, count), {a},
      [start, count](Node<Scalar>& self) {
        auto& p = *self.parents[0];
        Matrix<Scalar> g = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
        g.middleCols(start, count) = self.grad;
        p.accumulate(g);
      },
      "slice_cols");
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  detail::require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows out of range");
  return detail::make_result<Scalar>(
      a.value().middleRows(start, count), {a},
      [start, count](Node<Scalar>& self) {
        auto& p = *self.parents[0];
        Matrix<Scalar> g = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
        g.middleRows(start, count) = self.grad;
        p.accumulate(g);
      },
      "slice_rows");
}

/// out[i] = table[ids[i]], or a zero row where ids[i] < 0.
template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& table, std::span<const int> ids) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::require(ids[i] < table.rows(), "gather_rows index " + std::to_string(ids[i]) + " >= " +
                                               std::to_string(table.rows()));
    if (ids[i] < 0) {
      out.row(static_cast<Eigen::Index>(i)).setZero();
    } else {
      out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
  }
  return detail::make_result<Scalar>(
      std::move(out), {table},
      [idx = std::vector<int>(ids.begin(), ids.end())](Node<Scalar>& self) {
        auto& p = *self.parents[0];
        Matrix<Scalar> g = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (idx[i] >= 0) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
        }
        p.accumulate(g);
      },
      "gather_rows");
}

template <typename Scalar>
Tensor<Scalar> embedding_lookup(const Tensor<Scalar>& table, std::span<const int> ids) {
  return gather_rows(table, ids);
}

/// Row-wise softmax. Entries where `mask` is false get probability exactly 0.
template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& x, const BoolMatrix* mask = nullptr) {
  if (mask != nullptr) {
    detail::require(mask->rows() == x.rows() && mask->cols() == x.cols(), "softmax mask shape");
  }
  Matrix<Scalar> y = x.value();
  if (mask != nullptr) {
    y = mask->select(y, Matrix<Scalar>::Constant(y.rows(), y.cols(), detail::masked_logit<Scalar>()));
  }
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    auto row = y.row(i);
    const Scalar m = row.maxCoeff();
    for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = detail::scalar_exp(row(j) - m);
    row /= detail::sequential_sum(row);
  }
  if (mask != nullptr) y = mask->select(y, Matrix<Scalar>::Zero(y.rows(), y.cols()));
  return detail::make_result<Scalar>(
      std::move(y), {x},
      [](Node<Scalar>& self) {
        const auto& y = self.value;
        Matrix<Scalar> g = self.grad;
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
          const Scalar dot = y.row(i).dot(self.grad.row(i));
          g.row(i) = (y.row(i).array() * (self.grad.row(i).array() - dot)).matrix();
        }
        self.parents[0]->accumulate(g);
      },
      "softmax_rows");
}

template <typename Scalar>
Tensor<Scalar> softmax_last_dim(const Tensor<Scalar>& x, const BoolMatrix* mask = nullptr) {
  return softmax_rows(x, mask);
}

/// Per-row normalization with learned gain and bias (both 1 x cols).
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain, const Tensor<Scalar>& bias,
                          Scalar eps = Scalar(1e-5)) {
  detail::require(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 && bias.cols() == x.cols(),
                  "layer_norm parameter shape");
  const auto n = x.cols();
  Matrix<Scalar> xhat(x.rows(), n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rstd(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar mu = detail::sequential_sum(x.value().row(i)) / static_cast<Scalar>(n);
    const auto centered = (x.value().row(i).array() - mu).eval();
    const Scalar var = detail::sequential_sum(centered.square()) / static_cast<Scalar>(n);
    rstd(i) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (centered * rstd(i)).matrix();
  }
  Matrix<Scalar> out = xhat;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return detail::make_result<Scalar>(
      std::move(out), {x, gain, bias},
      [xhat = std::move(xhat), rstd = std::move(rstd)](Node<Scalar>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pg.requires_grad) pg.accumulate((self.grad.array() * xhat.array()).matrix().colwise().sum());
        if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
        if (px.requires_grad) {
          Matrix<Scalar> dxhat = self.grad;
          dxhat.array().rowwise() *= pg.value.row(0).array();
          Matrix<Scalar> dx(dxhat.rows(), dxhat.cols());
          for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
            const Scalar m1 = dxhat.row(i).mean();
            const Scalar m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
            dx.row(i) = (rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2)).matrix();
          }
          px.accumulate(dx);
        }
      },
      "layer_norm");
}

/// Exact (erf) GELU.
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  Matrix<Scalar> out = x.value().unaryExpr([inv_sqrt2](Scalar v) {
    return Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2));
  });
  return detail::make_result<Scalar>(
      std::move(out), {x},
      [inv_sqrt2](Node<Scalar>& self) {
        auto& p = *self.parents[0];
        const Scalar inv_sqrt2pi = Scalar(1) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
        Matrix<Scalar> d = p.value.unaryExpr([&](Scalar v) {
          const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2));
          const Scalar pdf = inv_sqrt2pi * std::exp(Scalar(-0.5) * v * v);
          return cdf + v * pdf;
        });
        p.accumulate((d.array() * self.grad.array()).matrix());
      },
      "gelu");
}

/// Inverted dropout; identity when not training or p == 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, Scalar p, std::mt19937_64& rng, bool train) {
  if (!train || p <= Scalar(0)) return x;
  detail::require(p < Scalar(1), "dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Scalar scale_kept = Scalar(1) / (Scalar(1) - p);
  Matrix<Scalar> m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale_kept : Scalar(0);
  Matrix<Scalar> out = (x.value().array() * m.array()).matrix();
  return detail::make_result<Scalar>(
      std::move(out), {x},
      [m = std::move(m)](Node<Scalar>& self) {
        self.parents[0]->accumulate((self.grad.array() * m.array()).matrix());
      },
      "dropout");
}

/// Mean over rows of -log softmax(logits[i])[targets[i]], with optional legality
/// mask. A masked target throws GoldIllegalUnderMask.
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits, std::span<const int> targets,
                             const BoolMatrix* mask = nullptr) {
  detail::require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy target count");
  if (mask != nullptr) {
    detail::require(mask->rows() == logits.rows() && mask->cols() == logits.cols(), "cross_entropy mask shape");
  }
  const auto n = logits.rows();
  Matrix<Scalar> probs = logits.value();
  if (mask != nullptr) {
    probs = mask->select(probs, Matrix<Scalar>::Constant(probs.rows(), probs.cols(), detail::masked_logit<Scalar>()));
  }
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    detail::require(t >= 0 && t < logits.cols(), "cross_entropy target out of range");
    if (mask != nullptr && !(*mask)(i, t)) {
      throw Error(Errc::GoldIllegalUnderMask, "target " + std::to_string(t) + " masked at row " + std::to_string(i));
    }
    auto row = probs.row(i);
    const Scalar m = row.maxCoeff();
    const Scalar log_z = m + std::log((row.array() - m).exp().sum());
    total += log_z - row(t);
    row = (row.array() - log_z).exp().matrix();
  }
  if (mask != nullptr) probs = mask->select(probs, Matrix<Scalar>::Zero(probs.rows(), probs.cols()));
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(n);
  return detail::make_result<Scalar>(
      std::move(out), {logits},
      [probs = std::move(probs), t = std::vector<int>(targets.begin(), targets.end())](Node<Scalar>& self) {
        Matrix<Scalar> g = probs;
        for (std::size_t i = 0; i < t.size(); ++i) g(static_cast<Eigen::Index>(i), t[i]) -= Scalar(1);
        g *= self.grad(0, 0) / static_cast<Scalar>(t.size());
        self.parents[0]->accumulate(g);
      },
      "cross_entropy");
}

}  // namespace atg
