#include "nilm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nilm/errors.hpp"

namespace nilm::ops {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_result(Shape shape, std::vector<double> value, std::string_view op,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool track = false;
  if (GradMode::enabled()) {
    for (const Tensor* in : inputs) track = track || in->requires_grad();
  }
  node->leaf = !track;
  if (track) {
    node->requires_grad = true;
    for (const Tensor* in : inputs) node->inputs.push_back(in->node());
    node->backward = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

// Grad buffer of input `i` when it participates, else nullptr.
double* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, std::string_view name, Forward f, Derivative df) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), name, {&x},
                     [df](Node& self) {
                       double* gx = input_grad(self, 0);
                       if (!gx) return;
                       const auto& xin = self.inputs[0]->value;
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         gx[i] += self.grad[i] * df(xin[i], self.value[i]);
                     });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel_size,
                                 std::size_t dilation, Padding padding) {
  if (kernel_size == 0) throw SizeError("conv1d: kernel size must be >= 1");
  if (dilation == 0) throw UsageError("conv1d: dilation must be >= 1");
  if (padding == Padding::kSame) {
    if (kernel_size % 2 == 0)
      throw DimensionError("conv1d: same padding requires an odd kernel size");
    return length;
  }
  std::size_t field = receptive_field(kernel_size, dilation);
  if (length < field)
    throw SizeError("conv1d: input length " + std::to_string(length) +
                    " shorter than receptive field " + std::to_string(field));
  return length - (field - 1);
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t dilation, Padding padding) {
  if (input.rank() != 2)
    throw DimensionError("conv1d: input must be [channels x length], got " +
                         shape_to_string(input.shape()));
  if (kernels.rank() != 3)
    throw DimensionError("conv1d: kernels must be [out x in x k], got " +
                         shape_to_string(kernels.shape()));
  const std::size_t c_in = input.dim(0);
  const std::size_t length = input.dim(1);
  const std::size_t c_out = kernels.dim(0);
  const std::size_t k = kernels.dim(2);
  if (kernels.dim(1) != c_in)
    throw DimensionError("conv1d: kernels expect " + std::to_string(kernels.dim(1)) +
                         " input channels, input has " + std::to_string(c_in));
  if (bias.rank() != 1 || bias.dim(0) != c_out)
    throw DimensionError("conv1d: bias must be [" + std::to_string(c_out) + "]");

  const std::size_t out_len = conv1d_output_length(length, k, dilation, padding);
  const long offset =
      padding == Padding::kSame ? static_cast<long>((k - 1) * dilation / 2) : 0;

  // Valid output range for tap shift s: 0 <= t + s < length.
  auto tap_range = [=](long shift) {
    long lo = std::max(0L, -shift);
    long hi = std::min(static_cast<long>(out_len), static_cast<long>(length) - shift);
    return std::pair<long, long>{lo, std::max(lo, hi)};
  };

  auto x = input.data();
  auto w = kernels.data();
  auto b = bias.data();
  std::vector<double> out(c_out * out_len);
  for (std::size_t co = 0; co < c_out; ++co) {
    double* dst = out.data() + co * out_len;
    std::fill(dst, dst + out_len, b[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* src = x.data() + ci * length;
      for (std::size_t j = 0; j < k; ++j) {
        const double wv = w[(co * c_in + ci) * k + j];
        const long shift = static_cast<long>(j * dilation) - offset;
        auto [lo, hi] = tap_range(shift);
        for (long t = lo; t < hi; ++t) dst[t] += wv * src[t + shift];
      }
    }
  }

  return make_result(
      Shape{c_out, out_len}, std::move(out), "conv1d", {&input, &kernels, &bias},
      [=](Node& self) {
        const double* g = self.grad.data();
        const auto& xv = self.inputs[0]->value;
        const auto& wv = self.inputs[1]->value;
        double* gx = input_grad(self, 0);
        double* gw = input_grad(self, 1);
        double* gb = input_grad(self, 2);
        for (std::size_t co = 0; co < c_out; ++co) {
          const double* gco = g + co * out_len;
          if (gb) {
            double acc = 0.0;
            for (std::size_t t = 0; t < out_len; ++t) acc += gco[t];
            gb[co] += acc;
          }
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            const double* src = xv.data() + ci * length;
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t widx = (co * c_in + ci) * k + j;
              const long shift = static_cast<long>(j * dilation) - offset;
              auto [lo, hi] = tap_range(shift);
              if (gw) {
                double acc = 0.0;
                for (long t = lo; t < hi; ++t) acc += gco[t] * src[t + shift];
                gw[widx] += acc;
              }
              if (gx) {
                double* dst = gx + ci * length;
                const double wval = wv[widx];
                for (long t = lo; t < hi; ++t) dst[t + shift] += wval * gco[t];
              }
            }
          }
        }
      });
}

Tensor matvec(const Tensor& weight, const Tensor& input) {
  if (weight.rank() != 2 || input.rank() != 1 || weight.dim(1) != input.dim(0))
    throw DimensionError("matvec: cannot multiply " + shape_to_string(weight.shape()) +
                         " by " + shape_to_string(input.shape()));
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = weight.dim(1);
  auto w = weight.data();
  auto x = input.data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return make_result(Shape{rows}, std::move(out), "matvec", {&weight, &input},
                     [rows, cols](Node& self) {
                       const auto& wv = self.inputs[0]->value;
                       const auto& xv = self.inputs[1]->value;
                       double* gw = input_grad(self, 0);
                       double* gx = input_grad(self, 1);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double g = self.grad[r];
                         if (gw)
                           for (std::size_t c = 0; c < cols; ++c)
                             gw[r * cols + c] += g * xv[c];
                         if (gx)
                           for (std::size_t c = 0; c < cols; ++c)
                             gx[c] += g * wv[r * cols + c];
                       }
                     });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (bias.rank() != 1 || weight.rank() != 2 || bias.dim(0) != weight.dim(0))
    throw DimensionError("linear: bias " + shape_to_string(bias.shape()) +
                         " does not match weight " + shape_to_string(weight.shape()));
  return add(matvec(weight, input), bias);
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1)
    throw DimensionError("softmax: expects a rank-1 tensor, got " +
                         shape_to_string(x.shape()));
  auto in = x.data();
  const double peak = *std::max_element(in.begin(), in.end());
  std::vector<double> out(in.size());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return make_result(x.shape(), std::move(out), "softmax", {&x}, [](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.value[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      gx[i] += self.value[i] * (self.grad[i] - dot);
  });
}

Tensor log(const Tensor& x) {
  for (double v : x.data())
    if (!(v > 0.0)) throw UsageError("log: non-positive input");
  return unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw UsageError("clamp: lower bound above upper bound");
  return unary(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

namespace {

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind) {
  const char* name = kind == Binary::kAdd ? "add" : kind == Binary::kSub ? "sub" : "mul";
  require_same_shape(a, b, name);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: out[i] = av[i] + bv[i]; break;
      case Binary::kSub: out[i] = av[i] - bv[i]; break;
      case Binary::kMul: out[i] = av[i] * bv[i]; break;
    }
  }
  return make_result(a.shape(), std::move(out), name, {&a, &b}, [kind](Node& self) {
    double* ga = input_grad(self, 0);
    double* gb = input_grad(self, 1);
    const auto& g = self.grad;
    const auto& x = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (kind) {
        case Binary::kAdd:
          if (ga) ga[i] += g[i];
          if (gb) gb[i] += g[i];
          break;
        case Binary::kSub:
          if (ga) ga[i] += g[i];
          if (gb) gb[i] -= g[i];
          break;
        case Binary::kMul:
          if (ga) ga[i] += g[i] * y[i];
          if (gb) gb[i] += g[i] * x[i];
          break;
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kMul); }

Tensor add(const Tensor& a, double scalar) {
  return unary(
      a, "add_scalar", [scalar](double v) { return v + scalar; },
      [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double scalar) {
  return unary(
      a, "mul_scalar", [scalar](double v) { return v * scalar; },
      [scalar](double, double) { return scalar; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result(Shape{}, {total}, "sum", {&x}, [](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    const double g = self.grad[0];
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  return mul(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw UsageError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size())
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size())
      throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != first[d])
        throw DimensionError("concat: extent mismatch on axis " + std::to_string(d) +
                             ": " + shape_to_string(s) + " vs " +
                             shape_to_string(first));
    out_shape[axis] += s[axis];
  }

  // View each part as [outer x (extent * inner)] blocks.
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<std::size_t> widths;
  std::vector<double> out(shape_size(out_shape));
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    const std::size_t width = p.shape()[axis] * inner;
    auto src = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.data() + o * width, width, out.data() + o * out_row + col);
    widths.push_back(width);
    col += width;
  }

  auto node = std::make_shared<Node>();
  node->shape = std::move(out_shape);
  node->value = std::move(out);
  node->op = "concat";
  bool track = false;
  if (GradMode::enabled())
    for (const Tensor& p : parts) track = track || p.requires_grad();
  node->leaf = !track;
  if (track) {
    node->requires_grad = true;
    for (const Tensor& p : parts) node->inputs.push_back(p.node());
    node->backward = [widths, outer, out_row](Node& self) {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        if (double* g = input_grad(self, i)) {
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t c = 0; c < widths[i]; ++c)
              g[o * widths[i] + c] += self.grad[o * out_row + offset + c];
        }
        offset += widths[i];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw DimensionError("reshape: " + shape_to_string(x.shape()) + " -> " +
                         shape_to_string(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), "reshape", {&x}, [](Node& self) {
    double* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor slice_columns(const Tensor& x, std::size_t start, std::size_t count) {
  if (x.rank() != 2) throw DimensionError("slice_columns: expects a rank-2 tensor");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (count == 0 || start + count > cols)
    throw DimensionError("slice_columns: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " +
                         std::to_string(cols) + " columns");
  auto src = x.data();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(src.data() + r * cols + start, count, out.data() + r * count);
  return make_result(Shape{rows, count}, std::move(out), "slice_columns", {&x},
                     [rows, cols, start, count](Node& self) {
                       double* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < count; ++c)
                           gx[r * cols + start + c] += self.grad[r * count + c];
                     });
}

Tensor repeat_columns(const Tensor& x, std::size_t count) {
  if (x.rank() != 1) throw DimensionError("repeat_columns: expects a rank-1 tensor");
  if (count == 0) throw DimensionError("repeat_columns: count must be positive");
  const std::size_t rows = x.dim(0);
  auto src = x.data();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::fill_n(out.data() + r * count, count, src[r]);
  return make_result(Shape{rows, count}, std::move(out), "repeat_columns", {&x},
                     [rows, count](Node& self) {
                       double* gx = input_grad(self, 0);
                       if (!gx) return;
                       for (std::size_t r = 0; r < rows; ++r) {
                         double acc = 0.0;
                         for (std::size_t c = 0; c < count; ++c)
                           acc += self.grad[r * count + c];
                         gx[r] += acc;
                       }
                     });
}

}  // namespace nilm::ops
