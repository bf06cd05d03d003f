// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "allo/error.hpp"
#include "allo/tensor.hpp"

namespace allo {
namespace {
thread_local GradTape* g_active_tape = nullptr;
}  // namespace

GradTape::Scope::Scope(GradTape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

GradTape::Scope::~Scope() { g_active_tape = previous_; }

GradTape* GradTape::active() { return g_active_tape; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void GradTape::record(const Tensor& output, BackwardFn backward) {
  if (consumed_) throw ContractError("grad tape: cannot record on a consumed tape");
  entries_.push_back(Entry{output, std::move(backward)});
}

std::span<double> GradTape::grad(const Tensor& t) {
  auto [it, inserted] = grads_.try_emplace(t.id());
  if (inserted) it->second.assign(t.size(), 0.0);
  return it->second;
}

std::span<const double> GradTape::grad_if_any(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) return {};
  return it->second;
}

Gradients backward(GradTape& tape, const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError(fmt::format("backward: loss must be a scalar, got shape {}",
                                    loss.defined() ? shape_string(loss.shape()) : "<undefined>"));
  }
  if (tape.consumed_) throw ContractError("backward: tape already consumed");
  tape.consumed_ = true;
  if (loss.requires_grad()) {
    tape.grad(loss)[0] = 1.0;
    for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
      if (tape.grads_.count(it->output.id()) == 0) continue;
      it->backward(tape);
    }
  }
  tape.entries_.clear();
  return Gradients(std::move(tape.grads_));
}

}  // namespace allo
