#include "numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "core/error.hpp"

namespace histograph::numerics {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

thread_local std::uint64_t* t_kink_sink = nullptr;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

void require_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.value().rank() != rank) {
    fail(ErrorKind::Shape, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                               shape_string(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Shape,
         std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

Var make_output(Tensor value, bool recording, const char* op) {
  require_finite(value, op);
  return Var(std::move(value), recording);
}

}  // namespace

Tensor& VarNode::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<VarNode>(VarNode{std::move(value), Tensor(), requires_grad})) {}

void Tape::backward(Var& loss) {
  if (consumed_) fail(ErrorKind::State, "backward already ran on this tape; build a fresh tape per forward pass");
  if (loss.value().size() != 1) {
    fail(ErrorKind::Validation, "backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.grad_buffer()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

bool should_record(const Tape* tape, std::initializer_list<const Var*> inputs) {
  if (!tape) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Var* v) { return v->requires_grad(); });
}

Tensor softmax_values(const Tensor& x, std::size_t axis, double scale) {
  const auto& shape = x.shape();
  if (axis >= std::max<std::size_t>(shape.size(), 1)) {
    fail(ErrorKind::Shape, "softmax axis " + std::to_string(axis) + " invalid for " + shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  const std::size_t len = shape.empty() ? 1 : shape[axis];
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];

  Tensor y(x.shape(), 0.0);
  const auto in = x.data();
  auto out = y.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < inner; ++k) {
      const std::size_t base = o * len * inner + k;
      double peak = in[base];
      for (std::size_t i = 1; i < len; ++i) peak = std::max(peak, in[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = std::exp(in[base + i * inner] - peak);
        out[base + i * inner] = e;
        total += e;
      }
      // (scale * e) / total keeps the uniform case exact: every e is 1 and
      // total is the integer len, so scale == len gives exactly 1.
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] = scale * out[base + i * inner] / total;
    }
  }
  return y;
}

std::vector<double> softmax_vector(std::span<const double> logits) {
  Tensor t({logits.size()}, std::vector<double>(logits.begin(), logits.end()));
  return softmax_values(t, 0).storage();
}

void set_kink_sink(std::uint64_t* sink) { t_kink_sink = sink; }

void note_signs(std::span<const double> pre_activations) {
  if (!t_kink_sink) return;
  for (double v : pre_activations) *t_kink_sink = (*t_kink_sink ^ (v > 0.0 ? 1u : 2u)) * 0x100000001b3ull;
}

namespace ops {

Var matmul(Tape* tape, const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.shape()[1] != b.shape()[0]) {
    fail(ErrorKind::Shape, "matmul: inner dimensions disagree " + shape_string(a.shape()) + " · " +
                               shape_string(b.shape()));
  }
  Tensor c({a.shape()[0], b.shape()[1]}, 0.0);
  as_matrix(c).noalias() = as_matrix(a.value()) * as_matrix(b.value());
  const bool rec = should_record(tape, {&a, &b});
  Var out = make_output(std::move(c), rec, "matmul");
  if (rec) {
    tape->record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto g = as_matrix(out.grad());
      if (a.requires_grad()) as_matrix(a.grad_buffer()).noalias() += g * as_matrix(b.value()).transpose();
      if (b.requires_grad()) as_matrix(b.grad_buffer()).noalias() += as_matrix(a.value()).transpose() * g;
    });
  }
  return out;
}

Var transpose(Tape* tape, const Var& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor t({n, m}, 0.0);
  as_matrix(t) = as_matrix(a.value()).transpose();
  const bool rec = should_record(tape, {&a});
  Var out = make_output(std::move(t), rec, "transpose");
  if (rec) {
    tape->record([a, out]() mutable {
      if (!out.has_grad()) return;
      as_matrix(a.grad_buffer()) += as_matrix(out.grad()).transpose();
    });
  }
  return out;
}

Var add(Tape* tape, const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b.value()[i];
  const bool rec = should_record(tape, {&a, &b});
  Var out = make_output(std::move(c), rec, "add");
  if (rec) {
    tape->record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      for (const Var* v : {&a, &b}) {
        if (!v->requires_grad()) continue;
        auto& dst = v->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      }
    });
  }
  return out;
}

Var add_row_bias(Tape* tape, const Var& x, const Var& bias) {
  require_rank(x, 2, "add_row_bias");
  require_rank(bias, 1, "add_row_bias");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (bias.shape()[0] != cols) {
    fail(ErrorKind::Shape, "add_row_bias: bias " + shape_string(bias.shape()) + " vs " + shape_string(x.shape()));
  }
  Tensor y = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.at(r, c) += bias.value()[c];
  const bool rec = should_record(tape, {&x, &bias});
  Var out = make_output(std::move(y), rec, "add_row_bias");
  if (rec) {
    tape->record([x, bias, out, rows, cols]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto& gb = bias.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
      }
    });
  }
  return out;
}

Var scale(Tape* tape, const Var& x, double factor) {
  Tensor y = x.value();
  for (auto& v : y.data()) v *= factor;
  const bool rec = should_record(tape, {&x});
  Var out = make_output(std::move(y), rec, "scale");
  if (rec) {
    tape->record([x, out, factor]() mutable {
      if (!out.has_grad()) return;
      auto& gx = x.grad_buffer();
      const auto& g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    });
  }
  return out;
}

Var mul(Tape* tape, const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b.value()[i];
  const bool rec = should_record(tape, {&a, &b});
  Var out = make_output(std::move(c), rec, "mul");
  if (rec) {
    tape->record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
      }
    });
  }
  return out;
}

Var scale_rows(Tape* tape, const Var& x, const Var& row_factors) {
  require_rank(x, 2, "scale_rows");
  require_rank(row_factors, 1, "scale_rows");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (row_factors.shape()[0] != rows) {
    fail(ErrorKind::Shape, "scale_rows: factors " + shape_string(row_factors.shape()) + " vs " +
                               shape_string(x.shape()));
  }
  Tensor y = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.at(r, c) *= row_factors.value()[r];
  const bool rec = should_record(tape, {&x, &row_factors});
  Var out = make_output(std::move(y), rec, "scale_rows");
  if (rec) {
    tape->record([x, row_factors, out, rows, cols]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gx.at(r, c) += g.at(r, c) * row_factors.value()[r];
      }
      if (row_factors.requires_grad()) {
        auto& gs = row_factors.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gs[r] += g.at(r, c) * x.value().at(r, c);
      }
    });
  }
  return out;
}

Var node_norm(Tape* tape, const Var& x, const Var& gain, const Var& shift, double eps) {
  require_rank(x, 2, "node_norm");
  require_rank(gain, 1, "node_norm");
  require_rank(shift, 1, "node_norm");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (gain.shape()[0] != cols || shift.shape()[0] != cols) {
    fail(ErrorKind::Shape, "node_norm: gain " + shape_string(gain.shape()) + " / shift " +
                               shape_string(shift.shape()) + " vs " + shape_string(x.shape()));
  }
  if (!(eps > 0.0)) fail(ErrorKind::Validation, "node_norm: eps must be positive");
  const double inv_n = 1.0 / static_cast<double>(rows);
  Tensor xhat({rows, cols}, 0.0);
  std::vector<double> inv_std(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += x.value().at(r, c);
    mean *= inv_n;
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = x.value().at(r, c) - mean;
      var += d * d;
    }
    inv_std[c] = 1.0 / std::sqrt(var * inv_n + eps);
    for (std::size_t r = 0; r < rows; ++r) xhat.at(r, c) = (x.value().at(r, c) - mean) * inv_std[c];
  }
  Tensor y = xhat;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.at(r, c) = y.at(r, c) * gain.value()[c] + shift.value()[c];
  const bool rec = should_record(tape, {&x, &gain, &shift});
  Var out = make_output(std::move(y), rec, "node_norm");
  if (rec) {
    tape->record([x, gain, shift, out, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, cols,
                  inv_n]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      for (std::size_t c = 0; c < cols; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          sum_g += g.at(r, c);
          sum_gx += g.at(r, c) * xhat.at(r, c);
        }
        if (gain.requires_grad()) gain.grad_buffer()[c] += sum_gx;
        if (shift.requires_grad()) shift.grad_buffer()[c] += sum_g;
        if (x.requires_grad()) {
          auto& gx = x.grad_buffer();
          const double k = gain.value()[c] * inv_std[c];
          for (std::size_t r = 0; r < rows; ++r) {
            gx.at(r, c) += k * (g.at(r, c) - inv_n * sum_g - xhat.at(r, c) * inv_n * sum_gx);
          }
        }
      }
    });
  }
  return out;
}

Var leaky_relu(Tape* tape, const Var& x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) fail(ErrorKind::Validation, "leaky_relu slope must lie in [0, 1)");
  Tensor y = x.value();
  for (auto& v : y.data()) v = v > 0.0 ? v : slope * v;
  note_signs(x.value().data());
  const bool rec = should_record(tape, {&x});
  Var out = make_output(std::move(y), rec, "leaky_relu");
  if (rec) {
    tape->record([x, out, slope]() mutable {
      if (!out.has_grad()) return;
      auto& gx = x.grad_buffer();
      const auto& g = out.grad();
      const auto& xv = x.value();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : slope * g[i];
    });
  }
  return out;
}

Var softmax(Tape* tape, const Var& x, std::size_t axis, double scale) {
  Tensor y = softmax_values(x.value(), axis, scale);
  const bool rec = should_record(tape, {&x});
  Var out = make_output(std::move(y), rec, "softmax");
  if (rec) {
    tape->record([x, out, axis, scale]() mutable {
      if (!out.has_grad()) return;
      const auto& shape = x.shape();
      std::size_t outer = 1, inner = 1;
      const std::size_t len = shape.empty() ? 1 : shape[axis];
      for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
      for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
      const auto& yv = out.value();
      const auto& g = out.grad();
      auto& gx = x.grad_buffer();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t k = 0; k < inner; ++k) {
          const std::size_t base = o * len * inner + k;
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i) dot += g[base + i * inner] * yv[base + i * inner];
          dot /= scale;
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t idx = base + i * inner;
            gx[idx] += yv[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

Var sum(Tape* tape, const Var& x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const bool rec = should_record(tape, {&x});
  Var out = make_output(Tensor::scalar(total), rec, "sum");
  if (rec) {
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      for (auto& v : x.grad_buffer().data()) v += g;
    });
  }
  return out;
}

Var reshape(Tape* tape, const Var& x, Shape shape) {
  if (shape_size(shape) != x.value().size()) {
    fail(ErrorKind::Shape, "reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  }
  Tensor y(std::move(shape), x.value().storage());
  const bool rec = should_record(tape, {&x});
  Var out = Var(std::move(y), rec);
  if (rec) {
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      auto& gx = x.grad_buffer();
      const auto& g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Var slice_last(Tape* tape, const Var& x, std::size_t index) {
  require_rank(x, 3, "slice_last");
  const std::size_t m = x.shape()[0], n = x.shape()[1], depth = x.shape()[2];
  if (index >= depth) fail(ErrorKind::Bounds, "slice_last: index " + std::to_string(index) + " out of range");
  Tensor y({m, n}, 0.0);
  const auto& xv = x.value();
  for (std::size_t i = 0; i < m * n; ++i) y[i] = xv[i * depth + index];
  const bool rec = should_record(tape, {&x});
  Var out = Var(std::move(y), rec);
  if (rec) {
    tape->record([x, out, index, depth]() mutable {
      if (!out.has_grad()) return;
      auto& gx = x.grad_buffer();
      const auto& g = out.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i * depth + index] += g[i];
    });
  }
  return out;
}

Var stack_last(Tape* tape, const std::vector<Var>& slices) {
  if (slices.empty()) fail(ErrorKind::Shape, "stack_last: no slices");
  for (const auto& s : slices) {
    require_rank(s, 2, "stack_last");
    require_same_shape(s, slices.front(), "stack_last");
  }
  const std::size_t m = slices[0].shape()[0], n = slices[0].shape()[1], depth = slices.size();
  Tensor y({m, n, depth}, 0.0);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& sv = slices[l].value();
    for (std::size_t i = 0; i < m * n; ++i) y[i * depth + l] = sv[i];
  }
  bool rec = false;
  if (tape) {
    rec = std::any_of(slices.begin(), slices.end(), [](const Var& v) { return v.requires_grad(); });
  }
  Var out = Var(std::move(y), rec);
  if (rec) {
    tape->record([slices, out, depth]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      for (std::size_t l = 0; l < depth; ++l) {
        if (!slices[l].requires_grad()) continue;
        auto& gs = slices[l].grad_buffer();
        for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += g[i * depth + l];
      }
    });
  }
  return out;
}

Var gather(Tape* tape, const Var& x, std::vector<std::size_t> indices) {
  if (indices.empty()) fail(ErrorKind::Shape, "gather: empty index list");
  const auto& xv = x.value();
  Tensor y({indices.size()}, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.size()) fail(ErrorKind::Bounds, "gather: index out of range");
    y[i] = xv[indices[i]];
  }
  const bool rec = should_record(tape, {&x});
  Var out = Var(std::move(y), rec);
  if (rec) {
    tape->record([x, out, idx = std::move(indices)]() mutable {
      if (!out.has_grad()) return;
      auto& gx = x.grad_buffer();
      const auto& g = out.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
    });
  }
  return out;
}

Var concat(Tape* tape, const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorKind::Shape, "concat: no parts");
  std::vector<double> data;
  for (const auto& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  bool rec = false;
  if (tape) rec = std::any_of(parts.begin(), parts.end(), [](const Var& v) { return v.requires_grad(); });
  const std::size_t total = data.size();
  Var out = Var(Tensor({total}, std::move(data)), rec);
  if (rec) {
    tape->record([parts, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t n = p.value().size();
        if (p.requires_grad()) {
          auto& gp = p.grad_buffer();
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
        }
        offset += n;
      }
    });
  }
  return out;
}

Var cross_entropy(Tape* tape, const Var& logits, std::size_t label) {
  require_rank(logits, 1, "cross_entropy");
  const auto& z = logits.value();
  if (label >= z.size()) fail(ErrorKind::Bounds, "cross_entropy: label out of range");
  double peak = z[0];
  for (double v : z.data()) peak = std::max(peak, v);
  double total = 0.0;
  for (double v : z.data()) total += std::exp(v - peak);
  const double loss = std::log(total) + peak - z[label];
  const bool rec = should_record(tape, {&logits});
  Var out = make_output(Tensor::scalar(loss), rec, "cross_entropy");
  if (rec) {
    tape->record([logits, out, label]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      const auto p = softmax_vector(logits.value().data());
      auto& gz = logits.grad_buffer();
      for (std::size_t i = 0; i < p.size(); ++i) gz[i] += g * (p[i] - (i == label ? 1.0 : 0.0));
    });
  }
  return out;
}

}  // namespace ops

}  // namespace histograph::numerics
