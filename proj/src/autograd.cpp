// Copyright 2026 The xtrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xtrans/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "blas.hpp"

namespace xtrans {

std::string shape_str(const Shape& shape)
{
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i)
    os << (i ? ", " : "") << shape[i];
  os << ")";
  return os.str();
}

namespace ag {

namespace {

thread_local bool g_grad_enabled = true;

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

template <class T>
Var<T> make_result(Tensor<T> value, std::vector<NodePtr<T>> inputs, std::function<void(Node<T>&)> fn)
{
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const NodePtr<T>& n) { return n && n->requires_grad; });
    if (any) {
      node->requires_grad = true;
      node->inputs = std::move(inputs);
      node->backward_fn = std::move(fn);
    }
  }
  return Var<T>(std::move(node));
}

template <class T>
bool wants(const NodePtr<T>& n)
{
  return n && n->requires_grad;
}

void require_same_shape(const Shape& a, const Shape& b, const char* op)
{
  if (a != b)
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_rank4(const Shape& s, const char* op)
{
  if (s.size() != 4)
    throw InvalidArgument(std::string(op) + ": expected NCHW tensor, got " + shape_str(s));
}

template <class T>
void im2col(const T* img, int C, int H, int W, int k, int s, int p, int Ho, int Wo, T* col)
{
  const int plane = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = col + static_cast<size_t>((c * k + ki) * k + kj) * plane;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * s - p + ki;
          T* out = row + oh * Wo;
          if (ih < 0 || ih >= H) {
            std::fill(out, out + Wo, T(0));
            continue;
          }
          const T* in = img + (static_cast<size_t>(c) * H + ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * s - p + kj;
            out[ow] = (iw >= 0 && iw < W) ? in[iw] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
template <class T>
void col2im(const T* col, int C, int H, int W, int k, int s, int p, int Ho, int Wo, T* img)
{
  const int plane = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = col + static_cast<size_t>((c * k + ki) * k + kj) * plane;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * s - p + ki;
          if (ih < 0 || ih >= H)
            continue;
          T* out = img + (static_cast<size_t>(c) * H + ih) * W;
          const T* in = row + oh * Wo;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * s - p + kj;
            if (iw >= 0 && iw < W)
              out[iw] += in[ow];
          }
        }
      }
    }
  }
}

template <class T>
T stable_sigmoid(T z)
{
  if (z >= 0) {
    T e = std::exp(-z);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(z);
  return e / (T(1) + e);
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>())
{
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <class T>
T Var<T>::item() const
{
  if (numel() != 1)
    throw InvalidArgument("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <class T>
void Var<T>::backward()
{
  if (numel() != 1)
    throw InvalidArgument("backward() requires a scalar root, got " + shape_str(shape()));
  if (!node_->requires_grad)
    return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->inputs.size()) {
      Node<T>* child = n->inputs[idx++].get();
      if (child && child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(n);
    stack.pop_back();
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->has_grad())
      n->backward_fn(*n);
  }
  for (Node<T>* n : order) {
    if (n->backward_fn) {
      n->backward_fn = nullptr;
      n->inputs.clear();
      n->grad = Tensor<T>();
    }
  }
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b)
{
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  T* o = out.data();
  for (int64_t i = 0; i < out.numel(); ++i)
    o[i] += bv[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      if (!wants(self.inputs[k]))
        continue;
      T* g = self.inputs[k]->grad_buffer().data();
      const T* s = self.grad.data();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        g[i] += s[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b)
{
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  T* o = out.data();
  for (int64_t i = 0; i < out.numel(); ++i)
    o[i] -= bv[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      if (!wants(self.inputs[k]))
        continue;
      const T sign = k == 0 ? T(1) : T(-1);
      T* g = self.inputs[k]->grad_buffer().data();
      const T* s = self.grad.data();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        g[i] += sign * s[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b)
{
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  T* o = out.data();
  for (int64_t i = 0; i < out.numel(); ++i)
    o[i] *= bv[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    const T* s = self.grad.data();
    for (int k = 0; k < 2; ++k) {
      if (!wants(self.inputs[k]))
        continue;
      const T* other = self.inputs[1 - k]->value.data();
      T* g = self.inputs[k]->grad_buffer().data();
      for (int64_t i = 0; i < self.grad.numel(); ++i)
        g[i] += s[i] * other[i];
    }
  });
}

template <class T>
Var<T> add_constant(const Var<T>& a, const Tensor<T>& c)
{
  require_same_shape(a.shape(), c.shape(), "add_constant");
  Tensor<T> out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i)
    out[i] += c[i];
  return make_result<T>(std::move(out), {a.node()}, [](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      g[i] += s[i];
  });
}

template <class T>
Var<T> affine(const Var<T>& x, T a, T b)
{
  Tensor<T> out = x.value();
  for (auto& v : out.values())
    v = a * v + b;
  return make_result<T>(std::move(out), {x.node()}, [a](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      g[i] += a * s[i];
  });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape)
{
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      g[i] += s[i];
  });
}

template <class T>
Var<T> relu(const Var<T>& x)
{
  return leaky_relu(x, T(0));
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope)
{
  Tensor<T> out = x.value();
  for (auto& v : out.values())
    v = v > T(0) ? v : slope * v;
  return make_result<T>(std::move(out), {x.node()}, [slope](Node<T>& self) {
    const T* xv = self.inputs[0]->value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      g[i] += xv[i] > T(0) ? s[i] : slope * s[i];
  });
}

template <class T>
Var<T> tanh(const Var<T>& x)
{
  Tensor<T> out = x.value();
  for (auto& v : out.values())
    v = std::tanh(v);
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    const T* y = self.value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      g[i] += s[i] * (T(1) - y[i] * y[i]);
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& x)
{
  Tensor<T> out = x.value();
  for (auto& v : out.values())
    v = stable_sigmoid(v);
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    const T* y = self.value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      g[i] += s[i] * y[i] * (T(1) - y[i]);
  });
}

template <class T>
Var<T> clamp(const Var<T>& x, T lo, T hi)
{
  Tensor<T> out = x.value();
  for (auto& v : out.values())
    v = std::clamp(v, lo, hi);
  return make_result<T>(std::move(out), {x.node()}, [lo, hi](Node<T>& self) {
    const T* xv = self.inputs[0]->value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      if (xv[i] >= lo && xv[i] <= hi)
        g[i] += s[i];
  });
}

template <class T>
Var<T> channel_affine_constant(const Var<T>& x, const std::vector<T>& scale, const std::vector<T>& shift)
{
  require_rank4(x.shape(), "channel_affine_constant");
  const int64_t N = x.dim(0), C = x.dim(1), M = x.dim(2) * x.dim(3);
  if (static_cast<int64_t>(scale.size()) != C || static_cast<int64_t>(shift.size()) != C)
    throw InvalidArgument("channel_affine_constant: channel count mismatch");
  Tensor<T> out = x.value();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      T* p = out.data() + (n * C + c) * M;
      for (int64_t i = 0; i < M; ++i)
        p[i] = p[i] * scale[c] + shift[c];
    }
  return make_result<T>(std::move(out), {x.node()}, [scale, N, C, M](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < M; ++i) {
          const int64_t idx = (n * C + c) * M + i;
          g[idx] += s[idx] * scale[c];
        }
  });
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad)
{
  require_rank4(x.shape(), "conv2d");
  require_rank4(weight.shape(), "conv2d weight");
  const int N = static_cast<int>(x.dim(0)), C = static_cast<int>(x.dim(1));
  const int H = static_cast<int>(x.dim(2)), W = static_cast<int>(x.dim(3));
  const int O = static_cast<int>(weight.dim(0)), k = static_cast<int>(weight.dim(2));
  if (weight.dim(1) != C || weight.dim(3) != k)
    throw InvalidArgument("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                          shape_str(x.shape()));
  if (bias.defined() && bias.numel() != O)
    throw InvalidArgument("conv2d: bias size mismatch");
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  if (Ho <= 0 || Wo <= 0)
    throw InvalidArgument("conv2d: input " + shape_str(x.shape()) + " too small for kernel");
  const int ckk = C * k * k, plane = Ho * Wo;

  Tensor<T> out({N, O, Ho, Wo});
  std::vector<T> col(static_cast<size_t>(ckk) * plane);
  const T* wv = weight.value().data();
  for (int n = 0; n < N; ++n) {
    im2col(x.value().data() + static_cast<size_t>(n) * C * H * W, C, H, W, k, stride, pad, Ho, Wo, col.data());
    T* y = out.data() + static_cast<size_t>(n) * O * plane;
    blas::gemm(false, false, O, plane, ckk, T(1), wv, ckk, col.data(), plane, T(0), y, plane);
    if (bias.defined()) {
      const T* b = bias.value().data();
      for (int o = 0; o < O; ++o)
        for (int i = 0; i < plane; ++i)
          y[o * plane + i] += b[o];
    }
  }

  return make_result<T>(std::move(out), {x.node(), weight.node(), bias.node()},
                        [=](Node<T>& self) {
                          const auto& xn = self.inputs[0];
                          const auto& wn = self.inputs[1];
                          const auto& bn = self.inputs[2];
                          const T* g = self.grad.data();
                          std::vector<T> buf(static_cast<size_t>(ckk) * plane);
                          if (wants(wn)) {
                            T* dw = wn->grad_buffer().data();
                            for (int n = 0; n < N; ++n) {
                              im2col(xn->value.data() + static_cast<size_t>(n) * C * H * W, C, H, W, k, stride, pad,
                                     Ho, Wo, buf.data());
                              blas::gemm(false, true, O, ckk, plane, T(1), g + static_cast<size_t>(n) * O * plane,
                                         plane, buf.data(), plane, T(1), dw, ckk);
                            }
                          }
                          if (wants(xn)) {
                            T* dx = xn->grad_buffer().data();
                            for (int n = 0; n < N; ++n) {
                              blas::gemm(true, false, ckk, plane, O, T(1), wn->value.data(), ckk,
                                         g + static_cast<size_t>(n) * O * plane, plane, T(0), buf.data(), plane);
                              col2im(buf.data(), C, H, W, k, stride, pad, Ho, Wo,
                                     dx + static_cast<size_t>(n) * C * H * W);
                            }
                          }
                          if (wants(bn)) {
                            T* db = bn->grad_buffer().data();
                            for (int n = 0; n < N; ++n)
                              for (int o = 0; o < O; ++o) {
                                const T* gp = g + (static_cast<size_t>(n) * O + o) * plane;
                                T acc = 0;
                                for (int i = 0; i < plane; ++i)
                                  acc += gp[i];
                                db[o] += acc;
                              }
                          }
                        });
}

template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad)
{
  require_rank4(x.shape(), "conv_transpose2d");
  require_rank4(weight.shape(), "conv_transpose2d weight");
  const int N = static_cast<int>(x.dim(0)), Ci = static_cast<int>(x.dim(1));
  const int Hi = static_cast<int>(x.dim(2)), Wi = static_cast<int>(x.dim(3));
  const int Co = static_cast<int>(weight.dim(1)), k = static_cast<int>(weight.dim(2));
  if (weight.dim(0) != Ci || weight.dim(3) != k)
    throw InvalidArgument("conv_transpose2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                          shape_str(x.shape()));
  if (bias.defined() && bias.numel() != Co)
    throw InvalidArgument("conv_transpose2d: bias size mismatch");
  const int Ho = (Hi - 1) * stride - 2 * pad + k;
  const int Wo = (Wi - 1) * stride - 2 * pad + k;
  const int ckk = Co * k * k, plane = Hi * Wi, oplane = Ho * Wo;

  Tensor<T> out({N, Co, Ho, Wo});
  std::vector<T> col(static_cast<size_t>(ckk) * plane);
  for (int n = 0; n < N; ++n) {
    blas::gemm(true, false, ckk, plane, Ci, T(1), weight.value().data(), ckk,
               x.value().data() + static_cast<size_t>(n) * Ci * plane, plane, T(0), col.data(), plane);
    T* y = out.data() + static_cast<size_t>(n) * Co * oplane;
    col2im(col.data(), Co, Ho, Wo, k, stride, pad, Hi, Wi, y);
    if (bias.defined()) {
      const T* b = bias.value().data();
      for (int o = 0; o < Co; ++o)
        for (int i = 0; i < oplane; ++i)
          y[o * oplane + i] += b[o];
    }
  }

  return make_result<T>(std::move(out), {x.node(), weight.node(), bias.node()},
                        [=](Node<T>& self) {
                          const auto& xn = self.inputs[0];
                          const auto& wn = self.inputs[1];
                          const auto& bn = self.inputs[2];
                          const T* g = self.grad.data();
                          std::vector<T> dcol(static_cast<size_t>(ckk) * plane);
                          const bool need_x = wants(xn), need_w = wants(wn);
                          if (need_x || need_w) {
                            for (int n = 0; n < N; ++n) {
                              im2col(g + static_cast<size_t>(n) * Co * oplane, Co, Ho, Wo, k, stride, pad, Hi, Wi,
                                     dcol.data());
                              if (need_x)
                                blas::gemm(false, false, Ci, plane, ckk, T(1), wn->value.data(), ckk, dcol.data(),
                                           plane, T(1), xn->grad_buffer().data() + static_cast<size_t>(n) * Ci * plane,
                                           plane);
                              if (need_w)
                                blas::gemm(false, true, Ci, ckk, plane, T(1),
                                           xn->value.data() + static_cast<size_t>(n) * Ci * plane, plane, dcol.data(),
                                           plane, T(1), wn->grad_buffer().data(), ckk);
                            }
                          }
                          if (wants(bn)) {
                            T* db = bn->grad_buffer().data();
                            for (int n = 0; n < N; ++n)
                              for (int o = 0; o < Co; ++o) {
                                const T* gp = g + (static_cast<size_t>(n) * Co + o) * oplane;
                                T acc = 0;
                                for (int i = 0; i < oplane; ++i)
                                  acc += gp[i];
                                db[o] += acc;
                              }
                          }
                        });
}

template <class T>
Var<T> max_pool2d(const Var<T>& x, int size)
{
  require_rank4(x.shape(), "max_pool2d");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Ho = H / size, Wo = W / size;
  if (Ho == 0 || Wo == 0)
    throw InvalidArgument("max_pool2d: input " + shape_str(x.shape()) + " smaller than window");
  Tensor<T> out({N, C, Ho, Wo});
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  const T* xv = x.value().data();
  for (int64_t nc = 0; nc < N * C; ++nc)
    for (int64_t oh = 0; oh < Ho; ++oh)
      for (int64_t ow = 0; ow < Wo; ++ow) {
        int64_t best = nc * H * W + (oh * size) * W + ow * size;
        for (int di = 0; di < size; ++di)
          for (int dj = 0; dj < size; ++dj) {
            const int64_t idx = nc * H * W + (oh * size + di) * W + ow * size + dj;
            if (xv[idx] > xv[best])
              best = idx;
          }
        const int64_t o = (nc * Ho + oh) * Wo + ow;
        out[o] = xv[best];
        argmax[static_cast<size_t>(o)] = best;
      }
  return make_result<T>(std::move(out), {x.node()}, [argmax = std::move(argmax)](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T* s = self.grad.data();
    for (size_t o = 0; o < argmax.size(); ++o)
      g[argmax[o]] += s[o];
  });
}

template <class T>
Var<T> channel_mean(const Var<T>& x)
{
  require_rank4(x.shape(), "channel_mean");
  const int64_t N = x.dim(0), C = x.dim(1), M = x.dim(2) * x.dim(3);
  Tensor<T> out({N, C});
  const T* xv = x.value().data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    T acc = 0;
    for (int64_t i = 0; i < M; ++i)
      acc += xv[nc * M + i];
    out[nc] = acc / static_cast<T>(M);
  }
  return make_result<T>(std::move(out), {x.node()}, [N, C, M](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const T v = self.grad[nc] / static_cast<T>(M);
      for (int64_t i = 0; i < M; ++i)
        g[nc * M + i] += v;
    }
  });
}

template <class T>
Var<T> channel_std(const Var<T>& x, T eps)
{
  require_rank4(x.shape(), "channel_std");
  const int64_t N = x.dim(0), C = x.dim(1), M = x.dim(2) * x.dim(3);
  Tensor<T> out({N, C});
  std::vector<T> means(static_cast<size_t>(N * C));
  const T* xv = x.value().data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    T mu = 0;
    for (int64_t i = 0; i < M; ++i)
      mu += xv[nc * M + i];
    mu /= static_cast<T>(M);
    T var = 0;
    for (int64_t i = 0; i < M; ++i) {
      const T d = xv[nc * M + i] - mu;
      var += d * d;
    }
    var /= static_cast<T>(M);
    means[static_cast<size_t>(nc)] = mu;
    out[nc] = std::sqrt(var + eps);
  }
  return make_result<T>(std::move(out), {x.node()}, [N, C, M, means = std::move(means)](Node<T>& self) {
    const T* xv = self.inputs[0]->value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const T coeff = self.grad[nc] / (static_cast<T>(M) * self.value[nc]);
      const T mu = means[static_cast<size_t>(nc)];
      for (int64_t i = 0; i < M; ++i)
        g[nc * M + i] += coeff * (xv[nc * M + i] - mu);
    }
  });
}

template <class T>
Var<T> instance_normalize(const Var<T>& x, T eps)
{
  require_rank4(x.shape(), "instance_normalize");
  const int64_t N = x.dim(0), C = x.dim(1), M = x.dim(2) * x.dim(3);
  Tensor<T> out = x.value();
  std::vector<T> inv_std(static_cast<size_t>(N * C));
  for (int64_t nc = 0; nc < N * C; ++nc) {
    T* p = out.data() + nc * M;
    T mu = 0;
    for (int64_t i = 0; i < M; ++i)
      mu += p[i];
    mu /= static_cast<T>(M);
    T var = 0;
    for (int64_t i = 0; i < M; ++i) {
      const T d = p[i] - mu;
      var += d * d;
    }
    var /= static_cast<T>(M);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(nc)] = inv;
    for (int64_t i = 0; i < M; ++i)
      p[i] = (p[i] - mu) * inv;
  }
  return make_result<T>(std::move(out), {x.node()}, [N, C, M, inv_std = std::move(inv_std)](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const T* xhat = self.value.data();
    const T* s = self.grad.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const int64_t off = nc * M;
      T mean_g = 0, mean_gx = 0;
      for (int64_t i = 0; i < M; ++i) {
        mean_g += s[off + i];
        mean_gx += s[off + i] * xhat[off + i];
      }
      mean_g /= static_cast<T>(M);
      mean_gx /= static_cast<T>(M);
      const T inv = inv_std[static_cast<size_t>(nc)];
      for (int64_t i = 0; i < M; ++i)
        g[off + i] += inv * (s[off + i] - mean_g - xhat[off + i] * mean_gx);
    }
  });
}

template <class T>
Var<T> channel_scale_shift(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta)
{
  require_rank4(x.shape(), "channel_scale_shift");
  const int64_t N = x.dim(0), C = x.dim(1), M = x.dim(2) * x.dim(3);
  const Shape want{N, C};
  require_same_shape(gamma.shape(), want, "channel_scale_shift gamma");
  require_same_shape(beta.shape(), want, "channel_scale_shift beta");
  Tensor<T> out = x.value();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T gm = gamma.value()[nc], bt = beta.value()[nc];
    T* p = out.data() + nc * M;
    for (int64_t i = 0; i < M; ++i)
      p[i] = p[i] * gm + bt;
  }
  return make_result<T>(std::move(out), {x.node(), gamma.node(), beta.node()}, [N, C, M](Node<T>& self) {
    const auto& xn = self.inputs[0];
    const auto& gn = self.inputs[1];
    const auto& bn = self.inputs[2];
    const T* s = self.grad.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const int64_t off = nc * M;
      if (wants(xn)) {
        T* g = xn->grad_buffer().data();
        const T gm = gn->value[nc];
        for (int64_t i = 0; i < M; ++i)
          g[off + i] += s[off + i] * gm;
      }
      if (wants(gn)) {
        const T* xv = xn->value.data();
        T acc = 0;
        for (int64_t i = 0; i < M; ++i)
          acc += s[off + i] * xv[off + i];
        gn->grad_buffer()[nc] += acc;
      }
      if (wants(bn)) {
        T acc = 0;
        for (int64_t i = 0; i < M; ++i)
          acc += s[off + i];
        bn->grad_buffer()[nc] += acc;
      }
    }
  });
}

template <class T>
Var<T> gram(const Var<T>& x)
{
  require_rank4(x.shape(), "gram");
  const int N = static_cast<int>(x.dim(0)), C = static_cast<int>(x.dim(1));
  const int M = static_cast<int>(x.dim(2) * x.dim(3));
  if (C == 0 || M == 0)
    throw InvalidArgument("gram: empty tensor");
  const T scale = T(1) / (static_cast<T>(C) * static_cast<T>(M));
  Tensor<T> out({N, C, C});
  for (int n = 0; n < N; ++n) {
    const T* phi = x.value().data() + static_cast<size_t>(n) * C * M;
    blas::gemm(false, true, C, C, M, scale, phi, M, phi, M, T(0), out.data() + static_cast<size_t>(n) * C * C, C);
  }
  return make_result<T>(std::move(out), {x.node()}, [N, C, M, scale](Node<T>& self) {
    std::vector<T> sym(static_cast<size_t>(C) * C);
    T* g = self.inputs[0]->grad_buffer().data();
    for (int n = 0; n < N; ++n) {
      const T* dg = self.grad.data() + static_cast<size_t>(n) * C * C;
      for (int i = 0; i < C; ++i)
        for (int j = 0; j < C; ++j)
          sym[static_cast<size_t>(i) * C + j] = dg[i * C + j] + dg[j * C + i];
      const T* phi = self.inputs[0]->value.data() + static_cast<size_t>(n) * C * M;
      blas::gemm(false, false, C, M, C, scale, sym.data(), C, phi, M, T(1), g + static_cast<size_t>(n) * C * M, M);
    }
  });
}

template <class T>
Var<T> mean(const Var<T>& x)
{
  T acc = 0;
  for (T v : x.value().values())
    acc += v;
  const T n = static_cast<T>(x.numel());
  Tensor<T> out(Shape{}, acc / n);
  return make_result<T>(std::move(out), {x.node()}, [n](Node<T>& self) {
    const T v = self.grad[0] / n;
    for (auto& g : self.inputs[0]->grad_buffer().values())
      g += v;
  });
}

template <class T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b)
{
  require_same_shape(a.shape(), b.shape(), "l1_loss");
  T acc = 0;
  const T* av = a.value().data();
  const T* bv = b.value().data();
  const int64_t count = a.numel();
  for (int64_t i = 0; i < count; ++i)
    acc += std::abs(av[i] - bv[i]);
  const T n = static_cast<T>(count);
  Tensor<T> out(Shape{}, acc / n);
  return make_result<T>(std::move(out), {a.node(), b.node()}, [n, count](Node<T>& self) {
    const T v = self.grad[0] / n;
    const T* av = self.inputs[0]->value.data();
    const T* bv = self.inputs[1]->value.data();
    for (int k = 0; k < 2; ++k) {
      if (!wants(self.inputs[k]))
        continue;
      const T sign = k == 0 ? T(1) : T(-1);
      T* g = self.inputs[k]->grad_buffer().data();
      for (int64_t i = 0; i < count; ++i) {
        const T d = av[i] - bv[i];
        g[i] += d > T(0) ? sign * v : (d < T(0) ? -sign * v : T(0));
      }
    }
  });
}

template <class T>
Var<T> mean_square(const Var<T>& x)
{
  T acc = 0;
  for (T v : x.value().values())
    acc += v * v;
  const T n = static_cast<T>(x.numel());
  Tensor<T> out(Shape{}, acc / n);
  return make_result<T>(std::move(out), {x.node()}, [n](Node<T>& self) {
    const T v = T(2) * self.grad[0] / n;
    const T* xv = self.inputs[0]->value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    for (int64_t i = 0; i < self.inputs[0]->value.numel(); ++i)
      g[i] += v * xv[i];
  });
}

template <class T>
Var<T> bce_with_logits(const Var<T>& logits, T target)
{
  T acc = 0;
  for (T z : logits.value().values())
    acc += std::max(z, T(0)) - z * target + std::log1p(std::exp(-std::abs(z)));
  const T n = static_cast<T>(logits.numel());
  Tensor<T> out(Shape{}, acc / n);
  return make_result<T>(std::move(out), {logits.node()}, [n, target](Node<T>& self) {
    const T v = self.grad[0] / n;
    const T* z = self.inputs[0]->value.data();
    T* g = self.inputs[0]->grad_buffer().data();
    for (int64_t i = 0; i < self.inputs[0]->value.numel(); ++i)
      g[i] += v * (stable_sigmoid(z[i]) - target);
  });
}

template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights)
{
  if (terms.size() != weights.size())
    throw InvalidArgument("weighted_sum: terms and weights differ in length");
  T acc = 0;
  std::vector<NodePtr<T>> inputs;
  for (size_t i = 0; i < terms.size(); ++i) {
    acc += weights[i] * terms[i].item();
    inputs.push_back(terms[i].node());
  }
  Tensor<T> out(Shape{}, acc);
  return make_result<T>(std::move(out), std::move(inputs), [weights](Node<T>& self) {
    for (size_t i = 0; i < self.inputs.size(); ++i)
      if (wants(self.inputs[i]))
        self.inputs[i]->grad_buffer()[0] += weights[i] * self.grad[0];
  });
}

#define XTRANS_INSTANTIATE(T)                                                                                     \
  template class Var<T>;                                                                                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                              \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                              \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                              \
  template Var<T> add_constant(const Var<T>&, const Tensor<T>&);                                                  \
  template Var<T> affine(const Var<T>&, T, T);                                                                    \
  template Var<T> reshape(const Var<T>&, Shape);                                                                  \
  template Var<T> relu(const Var<T>&);                                                                            \
  template Var<T> leaky_relu(const Var<T>&, T);                                                                   \
  template Var<T> tanh(const Var<T>&);                                                                            \
  template Var<T> sigmoid(const Var<T>&);                                                                         \
  template Var<T> clamp(const Var<T>&, T, T);                                                                     \
  template Var<T> channel_affine_constant(const Var<T>&, const std::vector<T>&, const std::vector<T>&);           \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                                  \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                        \
  template Var<T> max_pool2d(const Var<T>&, int);                                                                 \
  template Var<T> channel_mean(const Var<T>&);                                                                    \
  template Var<T> channel_std(const Var<T>&, T);                                                                  \
  template Var<T> instance_normalize(const Var<T>&, T);                                                           \
  template Var<T> channel_scale_shift(const Var<T>&, const Var<T>&, const Var<T>&);                               \
  template Var<T> gram(const Var<T>&);                                                                            \
  template Var<T> mean(const Var<T>&);                                                                            \
  template Var<T> l1_loss(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> mean_square(const Var<T>&);                                                                     \
  template Var<T> bce_with_logits(const Var<T>&, T);                                                              \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);

XTRANS_INSTANTIATE(float)
XTRANS_INSTANTIATE(double)

} // namespace ag
} // namespace xtrans
