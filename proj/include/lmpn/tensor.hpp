#pragma once

// Minimal dense-tensor engine with tape-based reverse-mode autodiff.
// Tensors are shared nodes; ops record backward closures on an explicit
// Tape. Pass tape == nullptr for inference-only forward passes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lmpn {

template <typename T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // same size as data iff requires_grad
};

template <typename T>
using Tensor = std::shared_ptr<TensorNode<T>>;

inline std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

template <typename T>
Tensor<T> make_tensor(std::vector<int> shape, std::vector<T> data,
                      bool requires_grad = false) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
  }
  if (numel(shape) != data.size()) {
    throw std::invalid_argument("tensor shape does not match data size");
  }
  auto t = std::make_shared<TensorNode<T>>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(t->data.size(), T(0));
  return t;
}

template <typename T>
Tensor<T> zeros(std::vector<int> shape, bool requires_grad = false) {
  std::vector<T> d(numel(shape), T(0));
  return make_tensor<T>(std::move(shape), std::move(d), requires_grad);
}

template <typename T>
Tensor<T> scalar_tensor(T value, bool requires_grad = false) {
  return make_tensor<T>({1}, {value}, requires_grad);
}

template <typename T>
void zero_grad(const Tensor<T>& t) {
  if (t->requires_grad) std::fill(t->grad.begin(), t->grad.end(), T(0));
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t->data) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

// Records op nodes in execution order; backward replays them in reverse.
// Each backward pass re-seeds the scalar loss with 1 after zeroing every
// op-output grad, so leaf gradients accumulate across repeated calls.
template <typename T>
class Tape {
 public:
  void record(Tensor<T> output, std::function<void()> back) {
    nodes_.emplace_back(std::move(output), std::move(back));
  }

  void backward(const Tensor<T>& loss) {
    if (!loss || loss->data.size() != 1) {
      throw std::invalid_argument("backward requires a scalar loss");
    }
    if (!loss->requires_grad) {
      throw std::invalid_argument("loss does not require grad");
    }
    for (auto& [out, fn] : nodes_) {
      std::fill(out->grad.begin(), out->grad.end(), T(0));
    }
    loss->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      it->second();
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::pair<Tensor<T>, std::function<void()>>> nodes_;
};

namespace detail {

template <typename T>
bool wants_grad(Tape<T>* tape, std::initializer_list<Tensor<T>> inputs) {
  if (!tape) return false;
  for (const auto& in : inputs) {
    if (in && in->requires_grad) return true;
  }
  return false;
}

}  // namespace detail

// out[t][f] = bias[f] + sum_{j<w, d<D} input[t+j][d] * kernel[j][d][f]
// input: {L, D}; kernel: {w, D, F}; bias: {F}; output: {L-w+1, F}.
template <typename T>
Tensor<T> conv1d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias) {
  if (input->shape.size() != 2 || kernel->shape.size() != 3 || bias->shape.size() != 1) {
    throw std::invalid_argument("conv1d: expected input {L,D}, kernel {w,D,F}, bias {F}");
  }
  const int L = input->shape[0], D = input->shape[1];
  const int w = kernel->shape[0], F = kernel->shape[2];
  if (kernel->shape[1] != D) throw std::invalid_argument("conv1d: kernel depth mismatch");
  if (bias->shape[0] != F) throw std::invalid_argument("conv1d: bias size mismatch");
  if (L < w) throw std::invalid_argument("sequence shorter than window");

  const int Lo = L - w + 1;
  auto out = zeros<T>({Lo, F}, detail::wants_grad(tape, {input, kernel, bias}));
  const T* in = input->data.data();
  const T* k = kernel->data.data();
  const T* b = bias->data.data();
  T* o = out->data.data();
  for (int t = 0; t < Lo; ++t) {
    for (int f = 0; f < F; ++f) o[t * F + f] = b[f];
    for (int j = 0; j < w; ++j) {
      for (int d = 0; d < D; ++d) {
        const T x = in[(t + j) * D + d];
        if (x == T(0)) continue;
        const T* kr = k + (j * D + d) * F;
        T* orow = o + t * F;
        for (int f = 0; f < F; ++f) orow[f] += x * kr[f];
      }
    }
  }
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [input, kernel, bias, out, L, D, w, F, Lo]() {
      const T* g = out->grad.data();
      const T* in = input->data.data();
      const T* k = kernel->data.data();
      if (bias->requires_grad) {
        for (int t = 0; t < Lo; ++t)
          for (int f = 0; f < F; ++f) bias->grad[f] += g[t * F + f];
      }
      if (kernel->requires_grad) {
        for (int t = 0; t < Lo; ++t) {
          const T* grow = g + t * F;
          for (int j = 0; j < w; ++j) {
            for (int d = 0; d < D; ++d) {
              const T x = in[(t + j) * D + d];
              if (x == T(0)) continue;
              T* kg = kernel->grad.data() + (j * D + d) * F;
              for (int f = 0; f < F; ++f) kg[f] += x * grow[f];
            }
          }
        }
      }
      if (input->requires_grad) {
        for (int t = 0; t < Lo; ++t) {
          const T* grow = g + t * F;
          for (int j = 0; j < w; ++j) {
            for (int d = 0; d < D; ++d) {
              const T* kr = k + (j * D + d) * F;
              T acc = T(0);
              for (int f = 0; f < F; ++f) acc += kr[f] * grow[f];
              input->grad[(t + j) * D + d] += acc;
            }
          }
        }
      }
    });
  }
  return out;
}

// Max over the time axis; gradient routes to the first argmax per channel.
template <typename T>
Tensor<T> maxpool_over_time(Tape<T>* tape, const Tensor<T>& input) {
  if (input->shape.size() != 2) throw std::invalid_argument("maxpool: expected {L,F} input");
  const int L = input->shape[0], F = input->shape[1];
  if (L < 1) throw std::invalid_argument("empty pooling input");
  auto out = zeros<T>({F}, detail::wants_grad(tape, {input}));
  auto arg = std::make_shared<std::vector<int>>(F, 0);
  for (int f = 0; f < F; ++f) {
    T best = input->data[f];
    int bi = 0;
    for (int t = 1; t < L; ++t) {
      const T v = input->data[t * F + f];
      if (v > best) {
        best = v;
        bi = t;
      }
    }
    out->data[f] = best;
    (*arg)[f] = bi;
  }
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [input, out, arg, F]() {
      if (!input->requires_grad) return;
      for (int f = 0; f < F; ++f) {
        input->grad[(*arg)[f] * F + f] += out->grad[f];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& input) {
  auto out = zeros<T>(input->shape, detail::wants_grad(tape, {input}));
  for (std::size_t i = 0; i < input->data.size(); ++i) {
    out->data[i] = input->data[i] > T(0) ? input->data[i] : T(0);
  }
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [input, out]() {
      if (!input->requires_grad) return;
      for (std::size_t i = 0; i < input->data.size(); ++i) {
        if (input->data[i] > T(0)) input->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

// input {In} or {B,In}; weights {In,Out}; bias {Out}.
template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weights,
                 const Tensor<T>& bias) {
  if (weights->shape.size() != 2 || bias->shape.size() != 1) {
    throw std::invalid_argument("linear: expected weights {In,Out}, bias {Out}");
  }
  const int In = weights->shape[0], Out = weights->shape[1];
  if (bias->shape[0] != Out) throw std::invalid_argument("linear: bias size mismatch");
  const bool batched = input->shape.size() == 2;
  const int B = batched ? input->shape[0] : 1;
  const int in_dim = batched ? input->shape[1] : input->shape[0];
  if (input->shape.size() > 2 || in_dim != In) {
    throw std::invalid_argument("linear: input shape mismatch");
  }
  auto out = zeros<T>(batched ? std::vector<int>{B, Out} : std::vector<int>{Out},
                      detail::wants_grad(tape, {input, weights, bias}));
  for (int r = 0; r < B; ++r) {
    T* orow = out->data.data() + r * Out;
    for (int o = 0; o < Out; ++o) orow[o] = bias->data[o];
    const T* irow = input->data.data() + r * In;
    for (int i = 0; i < In; ++i) {
      const T x = irow[i];
      if (x == T(0)) continue;
      const T* wr = weights->data.data() + i * Out;
      for (int o = 0; o < Out; ++o) orow[o] += x * wr[o];
    }
  }
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [input, weights, bias, out, B, In, Out]() {
      for (int r = 0; r < B; ++r) {
        const T* grow = out->grad.data() + r * Out;
        const T* irow = input->data.data() + r * In;
        if (bias->requires_grad) {
          for (int o = 0; o < Out; ++o) bias->grad[o] += grow[o];
        }
        if (weights->requires_grad) {
          for (int i = 0; i < In; ++i) {
            const T x = irow[i];
            if (x == T(0)) continue;
            T* wg = weights->grad.data() + i * Out;
            for (int o = 0; o < Out; ++o) wg[o] += x * grow[o];
          }
        }
        if (input->requires_grad) {
          for (int i = 0; i < In; ++i) {
            const T* wr = weights->data.data() + i * Out;
            T acc = T(0);
            for (int o = 0; o < Out; ++o) acc += wr[o] * grow[o];
            input->grad[r * In + i] += acc;
          }
        }
      }
    });
  }
  return out;
}

// Concatenate 1-D tensors in argument order.
template <typename T>
Tensor<T> concat(Tape<T>* tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  int total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    if (p->shape.size() != 1) throw std::invalid_argument("concat: expected 1-D inputs");
    total += p->shape[0];
    grad = grad || (tape && p->requires_grad);
  }
  auto out = zeros<T>({total}, grad);
  int off = 0;
  for (const auto& p : parts) {
    std::copy(p->data.begin(), p->data.end(), out->data.begin() + off);
    off += p->shape[0];
  }
  if (tape != nullptr && out->requires_grad) {
    auto parts_copy = parts;
    tape->record(out, [parts_copy, out]() {
      int off = 0;
      for (const auto& p : parts_copy) {
        if (p->requires_grad) {
          for (int i = 0; i < p->shape[0]; ++i) p->grad[i] += out->grad[off + i];
        }
        off += p->shape[0];
      }
    });
  }
  return out;
}

// Column-wise concatenation of matrices with the same row count.
template <typename T>
Tensor<T> hconcat(Tape<T>* tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat: no inputs");
  const int rows = parts[0]->shape.size() == 2 ? parts[0]->shape[0] : -1;
  int total_cols = 0;
  bool grad = false;
  for (const auto& p : parts) {
    if (p->shape.size() != 2 || p->shape[0] != rows) {
      throw std::invalid_argument("hconcat: expected 2-D inputs with matching rows");
    }
    total_cols += p->shape[1];
    grad = grad || (tape && p->requires_grad);
  }
  auto out = zeros<T>({rows, total_cols}, grad);
  int off = 0;
  for (const auto& p : parts) {
    const int c = p->shape[1];
    for (int r = 0; r < rows; ++r) {
      std::copy(p->data.begin() + r * c, p->data.begin() + (r + 1) * c,
                out->data.begin() + r * total_cols + off);
    }
    off += c;
  }
  if (tape != nullptr && out->requires_grad) {
    auto parts_copy = parts;
    tape->record(out, [parts_copy, out, rows, total_cols]() {
      int off = 0;
      for (const auto& p : parts_copy) {
        const int c = p->shape[1];
        if (p->requires_grad) {
          for (int r = 0; r < rows; ++r) {
            for (int i = 0; i < c; ++i) {
              p->grad[r * c + i] += out->grad[r * total_cols + off + i];
            }
          }
        }
        off += c;
      }
    });
  }
  return out;
}

// Row gather from an embedding table {V, D} by integer ids.
template <typename T>
Tensor<T> gather_rows(Tape<T>* tape, const Tensor<T>& table, const std::vector<int>& ids) {
  if (table->shape.size() != 2) throw std::invalid_argument("gather_rows: expected {V,D} table");
  const int V = table->shape[0], D = table->shape[1];
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= V) throw std::out_of_range("gather_rows: id out of range");
  }
  const int n = static_cast<int>(ids.size());
  auto out = zeros<T>({n, D}, detail::wants_grad(tape, {table}));
  for (int i = 0; i < n; ++i) {
    std::copy(table->data.begin() + ids[i] * D, table->data.begin() + (ids[i] + 1) * D,
              out->data.begin() + i * D);
  }
  if (tape != nullptr && out->requires_grad) {
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    tape->record(out, [table, out, ids_copy, D]() {
      if (!table->requires_grad) return;
      for (std::size_t i = 0; i < ids_copy->size(); ++i) {
        const int id = (*ids_copy)[i];
        for (int d = 0; d < D; ++d) {
          table->grad[id * D + d] += out->grad[i * D + d];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> squared_euclidean(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a->shape != b->shape || a->shape.size() != 1) {
    throw std::invalid_argument("squared_euclidean: dimension mismatch");
  }
  T acc = T(0);
  for (std::size_t i = 0; i < a->data.size(); ++i) {
    const T d = a->data[i] - b->data[i];
    acc += d * d;
  }
  auto out = make_tensor<T>({1}, {acc}, detail::wants_grad(tape, {a, b}));
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [a, b, out]() {
      const T g = out->grad[0];
      for (std::size_t i = 0; i < a->data.size(); ++i) {
        const T d = T(2) * (a->data[i] - b->data[i]) * g;
        if (a->requires_grad) a->grad[i] += d;
        if (b->requires_grad) b->grad[i] -= d;
      }
    });
  }
  return out;
}

// Numerically stable -log softmax(logits)[label].
template <typename T>
Tensor<T> log_softmax_xent(Tape<T>* tape, const Tensor<T>& logits, int label) {
  if (logits->shape.size() != 1) throw std::invalid_argument("log_softmax_xent: expected 1-D logits");
  const int n = logits->shape[0];
  if (label < 0 || label >= n) throw std::out_of_range("log_softmax_xent: label out of range");
  for (T v : logits->data) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw std::invalid_argument("log_softmax_xent: non-finite logit");
    }
  }
  T m = logits->data[0];
  for (int i = 1; i < n; ++i) m = std::max(m, logits->data[i]);
  T sum = T(0);
  for (int i = 0; i < n; ++i) sum += std::exp(logits->data[i] - m);
  const T lse = m + std::log(sum);
  auto out = make_tensor<T>({1}, {lse - logits->data[label]},
                            detail::wants_grad(tape, {logits}));
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [logits, out, label, n, m, sum]() {
      if (!logits->requires_grad) return;
      const T g = out->grad[0];
      for (int i = 0; i < n; ++i) {
        T p = std::exp(logits->data[i] - m) / sum;
        if (i == label) p -= T(1);
        logits->grad[i] += g * p;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a->shape != b->shape) throw std::invalid_argument("add: shape mismatch");
  auto out = zeros<T>(a->shape, detail::wants_grad(tape, {a, b}));
  for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [a, b, out]() {
      for (std::size_t i = 0; i < out->data.size(); ++i) {
        if (a->requires_grad) a->grad[i] += out->grad[i];
        if (b->requires_grad) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a->shape != b->shape) throw std::invalid_argument("sub: shape mismatch");
  auto out = zeros<T>(a->shape, detail::wants_grad(tape, {a, b}));
  for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] - b->data[i];
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [a, b, out]() {
      for (std::size_t i = 0; i < out->data.size(); ++i) {
        if (a->requires_grad) a->grad[i] += out->grad[i];
        if (b->requires_grad) b->grad[i] -= out->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& a, T c) {
  auto out = zeros<T>(a->shape, detail::wants_grad(tape, {a}));
  for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * c;
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [a, out, c]() {
      if (!a->requires_grad) return;
      for (std::size_t i = 0; i < a->data.size(); ++i) a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_const(Tape<T>* tape, const Tensor<T>& a, T c) {
  auto out = zeros<T>(a->shape, detail::wants_grad(tape, {a}));
  for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + c;
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [a, out]() {
      if (!a->requires_grad) return;
      for (std::size_t i = 0; i < a->data.size(); ++i) a->grad[i] += out->grad[i];
    });
  }
  return out;
}

// Elementwise mean of same-shape tensors; gradient distributes 1/n to each.
template <typename T>
Tensor<T> mean_stack(Tape<T>* tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("mean_stack: no inputs");
  bool grad = false;
  for (const auto& p : parts) {
    if (p->shape != parts[0]->shape) throw std::invalid_argument("mean_stack: shape mismatch");
    grad = grad || (tape && p->requires_grad);
  }
  auto out = zeros<T>(parts[0]->shape, grad);
  const T inv = T(1) / static_cast<T>(parts.size());
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p->data.size(); ++i) out->data[i] += p->data[i];
  }
  for (auto& v : out->data) v *= inv;
  if (tape != nullptr && out->requires_grad) {
    auto parts_copy = parts;
    tape->record(out, [parts_copy, out, inv]() {
      for (const auto& p : parts_copy) {
        if (!p->requires_grad) continue;
        for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += inv * out->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& a) {
  T acc = T(0);
  for (T v : a->data) acc += v;
  auto out = make_tensor<T>({1}, {acc}, detail::wants_grad(tape, {a}));
  if (tape != nullptr && out->requires_grad) {
    tape->record(out, [a, out]() {
      if (!a->requires_grad) return;
      for (std::size_t i = 0; i < a->data.size(); ++i) a->grad[i] += out->grad[0];
    });
  }
  return out;
}

enum class OptKind { sgd, adam };

// SGD with weight decay, or bias-corrected Adam. Gradients are consumed
// (cleared) by each step.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptKind kind, T lr, T weight_decay)
      : kind_(kind), lr_(lr), weight_decay_(weight_decay) {}

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }
  long step_count() const { return step_count_; }

  void step(const std::vector<Tensor<T>>& params) {
    for (const auto& p : params) {
      if (!p->requires_grad || p->grad.size() != p->data.size()) {
        throw std::runtime_error("optimizer step with missing gradients");
      }
    }
    ++step_count_;
    if (kind_ == OptKind::adam && m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (const auto& p : params) {
        m_.emplace_back(p->data.size(), T(0));
        v_.emplace_back(p->data.size(), T(0));
      }
    }
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(step_count_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(step_count_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = *params[pi];
      if (kind_ == OptKind::sgd) {
        for (std::size_t i = 0; i < p.data.size(); ++i) {
          p.data[i] -= lr_ * (p.grad[i] + weight_decay_ * p.data[i]);
        }
      } else {
        if (m_[pi].size() != p.data.size()) {
          throw std::runtime_error("optimizer moment buffer shape mismatch");
        }
        for (std::size_t i = 0; i < p.data.size(); ++i) {
          const T g = p.grad[i] + weight_decay_ * p.data[i];
          m_[pi][i] = beta1_ * m_[pi][i] + (T(1) - beta1_) * g;
          v_[pi][i] = beta2_ * v_[pi][i] + (T(1) - beta2_) * g * g;
          const T mhat = m_[pi][i] / bc1;
          const T vhat = v_[pi][i] / bc2;
          p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
      }
      std::fill(p.grad.begin(), p.grad.end(), T(0));
    }
  }

 private:
  OptKind kind_;
  T lr_;
  T weight_decay_;
  T beta1_ = T(0.9), beta2_ = T(0.999), eps_ = T(1e-8);
  long step_count_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace lmpn
