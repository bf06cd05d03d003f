// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 tensors and the reverse-mode gradient tape.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace allo {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
};
}  // namespace detail

/// Shared handle to a row-major block of doubles. Copies alias the same
/// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  /// Copy of the values with no gradient tracking.
  Tensor detach() const;
  /// Deep copy preserving requires_grad.
  Tensor clone() const;

  const detail::TensorImpl* id() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

class GradTape;

/// Gradients produced by one backward pass, keyed by tensor identity.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads)
      : grads_(std::move(grads)) {}

  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  /// Gradient for `t`; zeros when `t` was not reached from the loss.
  std::vector<double> of(const Tensor& t) const;

 private:
  std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads_;
};

/// Ordered record of primitive operations. Recording order is a valid
/// topological order, so backward simply walks the entries in reverse.
///
/// Operations record onto the tape made active by a Scope on the calling
/// thread; with no active tape nothing is recorded.
class GradTape {
 public:
  using BackwardFn = std::function<void(GradTape&)>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  class Scope {
   public:
    explicit Scope(GradTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* previous_;
  };

  static GradTape* active();

  void record(const Tensor& output, BackwardFn backward);
  std::size_t size() const { return entries_.size(); }

  /// Accumulator for `t`, zero-initialized on first access.
  std::span<double> grad(const Tensor& t);
  /// Accumulated gradient of `t`, or an empty span if none was produced.
  std::span<const double> grad_if_any(const Tensor& t) const;

  friend Gradients backward(GradTape& tape, const Tensor& loss);

 private:
  struct Entry {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads_;
  bool consumed_ = false;
};

/// Suspends recording on the calling thread for its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  GradTape* previous_;
};

/// Reverse pass from a scalar loss. Consumes the tape.
Gradients backward(GradTape& tape, const Tensor& loss);

/// True when an op over `inputs` must be recorded on the active tape.
bool should_record(std::initializer_list<const Tensor*> inputs);

}  // namespace allo
