/* Copyright 2026 The ActorQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "actorq/nn/adam.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "actorq/common/error.hpp"

namespace actorq::nn {

AdamState make_adam_state(const MlpPolicy& net, AdamOptions options) {
  AdamState s;
  s.options = options;
  s.first_moment = zero_gradients(net);
  s.second_moment = zero_gradients(net);
  return s;
}

namespace {

void update(std::span<float> param, std::span<const float> grad, std::span<float> m,
            std::span<float> v, const AdamOptions& o, float step_size, float inv_sqrt_c2) {
  using Array = Eigen::Map<Eigen::ArrayXf>;
  const auto n = static_cast<Eigen::Index>(param.size());
  Array p(param.data(), n), mm(m.data(), n), vv(v.data(), n);
  const Eigen::Map<const Eigen::ArrayXf> g(grad.data(), n);
  mm = o.beta1 * mm + (1.0f - o.beta1) * g;
  vv = o.beta2 * vv + (1.0f - o.beta2) * g.square();
  p -= step_size * mm / (vv.sqrt() * inv_sqrt_c2 + o.eps);
}

}  // namespace

void apply_adam(AdamState& state, MlpPolicy& net, const Gradients& grads) {
  if (grads.size() != net.layer_count() || state.first_moment.size() != net.layer_count()) {
    throw DomainError("gradient/optimizer state does not match the network");
  }
  for (std::size_t l = 0; l < grads.size(); ++l) {
    for (const Tensor* t : {&grads[l].weight, &grads[l].bias}) {
      const Eigen::Map<const Eigen::VectorXf> g(t->raw(), static_cast<Eigen::Index>(t->size()));
      if (!g.allFinite()) {
        throw TrainingError("non-finite gradient in layer " + std::to_string(l));
      }
    }
  }
  ++state.step;
  const AdamOptions& o = state.options;
  const double c1 = 1.0 - std::pow(static_cast<double>(o.beta1), static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(static_cast<double>(o.beta2), static_cast<double>(state.step));
  // Bias corrections folded into the step size and the second-moment root.
  const auto step_size = static_cast<float>(o.lr / c1);
  const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  for (std::size_t l = 0; l < grads.size(); ++l) {
    DenseLayer& p = net.layers()[l];
    update(p.weight.data(), grads[l].weight.data(), state.first_moment[l].weight.data(),
           state.second_moment[l].weight.data(), o, step_size, inv_sqrt_c2);
    update(p.bias.data(), grads[l].bias.data(), state.first_moment[l].bias.data(),
           state.second_moment[l].bias.data(), o, step_size, inv_sqrt_c2);
  }
}

}  // namespace actorq::nn
