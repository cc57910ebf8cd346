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

#ifndef AVSD_AUTOGRAD_H_
#define AVSD_AUTOGRAD_H_

#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "avsd/params.h"
#include "avsd/tensor.h"

namespace avsd {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as
// the owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  size_t rows() const { return value().rows(); }
  size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  size_t id_ = 0;
};

// Reverse-mode differentiation record. Every op appends a node holding its
// value and, when any input needs a gradient, a closure that pushes the
// output gradient back onto its inputs. Backward() replays the closures in
// reverse recording order, each exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  // With record = false no closures are stored (inference mode).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);

  // Leaf bound to `store[name]`, created on demand if the store allows it.
  // Repeated requests for the same name return the same node so gradients
  // from shared weights accumulate in one place.
  Var Param(ParameterStore& store, const std::string& name, const Shape& shape,
            InitKind kind);

  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var Record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  // Parameters whose name starts with any of these prefixes are treated as
  // constants: no gradient is ever computed for them.
  void set_frozen_prefixes(std::vector<std::string> prefixes) {
    frozen_prefixes_ = std::move(prefixes);
  }
  bool IsFrozen(const std::string& name) const;

  const Tensor& value(size_t id) const { return nodes_[id].value; }
  bool needs_grad(size_t id) const { return nodes_[id].needs_grad; }
  bool recording() const { return record_; }
  size_t size() const { return nodes_.size(); }

  void AccumulateGrad(size_t id, const Tensor& g);
  // Returns the gradient buffer of `id`, allocating zeros on first use.
  Tensor& GradBuffer(size_t id);

  // Runs the reverse sweep from a scalar loss. The result holds one entry
  // per parameter in `store`; parameters never reached get exact zeros.
  Gradients Backward(const Var& loss, const ParameterStore& store);

  // Parameter names that have a node on this tape and need gradients.
  std::vector<std::string> TrainableParamsSeen() const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    BackwardFn backward;
  };

  Var Push(Node node);

  bool record_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::map<std::string, size_t> param_nodes_;
  std::vector<std::string> frozen_prefixes_;
};

}  // namespace avsd

#endif  // AVSD_AUTOGRAD_H_
