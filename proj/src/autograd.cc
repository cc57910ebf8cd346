// Copyright (c) 2026 The avsd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avsd/autograd.h"

#include "avsd/common.h"

namespace avsd {

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an empty Var");
  return tape_->value(id_);
}

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return Push(std::move(n));
}

bool Tape::IsFrozen(const std::string& name) const {
  for (const auto& p : frozen_prefixes_) {
    if (name.compare(0, p.size(), p) == 0) return true;
  }
  return false;
}

Var Tape::Param(ParameterStore& store, const std::string& name,
                const Shape& shape, InitKind kind) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = store.GetOrCreate(name, shape, kind);
  n.needs_grad = record_ && !IsFrozen(name);
  Var v = Push(std::move(n));
  param_nodes_.emplace(name, v.id());
  return v;
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return Record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::Record(Tensor value, const std::vector<Var>& inputs,
                 BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& in : inputs) {
      if (in.tape() != this) throw Error("op mixes Vars from different tapes");
      if (nodes_[in.id()].needs_grad) n.needs_grad = true;
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  return Push(std::move(n));
}

Tensor& Tape::GradBuffer(size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::AccumulateGrad(size_t id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor& buf = GradBuffer(id);
  CheckSameShape(buf, g, "AccumulateGrad");
  double* d = buf.data();
  const double* s = g.data();
  for (size_t i = 0; i < g.size(); ++i) d[i] += s[i];
}

Gradients Tape::Backward(const Var& loss, const ParameterStore& store) {
  if (loss.tape() != this) throw Error("backward: loss is not on this tape");
  if (!record_) throw Error("backward: tape was created in inference mode");
  if (backward_done_) throw Error("backward: tape already consumed");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     ShapeToString(loss.value().shape()));
  }
  backward_done_ = true;
  if (nodes_[loss.id()].needs_grad) {
    GradBuffer(loss.id()).Fill(1.0);
    for (size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || !n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }
  Gradients grads;
  for (const auto& [name, t] : store.entries()) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end() && nodes_[it->second].has_grad) {
      grads.emplace(name, nodes_[it->second].grad);
    } else {
      grads.emplace(name, Tensor(t.shape(), 0.0));
    }
  }
  return grads;
}

std::vector<std::string> Tape::TrainableParamsSeen() const {
  std::vector<std::string> out;
  for (const auto& [name, id] : param_nodes_) {
    if (nodes_[id].needs_grad) out.push_back(name);
  }
  return out;
}

}  // namespace avsd
