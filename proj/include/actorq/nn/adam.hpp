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

#pragma once

#include <cstdint>
#include <vector>

#include "actorq/nn/mlp.hpp"

namespace actorq::nn {

struct AdamOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  Gradients first_moment;
  Gradients second_moment;
};

AdamState make_adam_state(const MlpPolicy& net, AdamOptions options);

// One bias-corrected Adam update. Throws TrainingError on a non-finite
// gradient, leaving parameters and state untouched.
void apply_adam(AdamState& state, MlpPolicy& net, const Gradients& grads);

}  // namespace actorq::nn
