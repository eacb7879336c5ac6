// SPDX-License-Identifier: Apache-2.0
//
// thzsim: multi-user terahertz link-level simulator and semantic beamforming toolkit
// Copyright (C) 2026 The thzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "thzsim/causal_dynamics.hpp"

#include <string>

namespace thzsim {

inline constexpr const char* kModelSchema = "cgm-model/v1";

/// Serialize to the cgm-model/v1 JSON document (doubles with 17 significant digits).
std::string model_to_json(const CausalModelBundle& bundle);
/// Parse and validate; throws std::invalid_argument on schema, shape, DAG or
/// normalization violations.
CausalModelBundle model_from_json(const std::string& text);

void export_model(const CausalModelBundle& bundle, const std::string& path);
CausalModelBundle load_trained_model(const std::string& path);

/// Default used when no trained model is supplied: empty graph
/// over `nodes`, uniform codeword tables over the M-point DFT codebook.
CausalModelBundle default_model(int nodes, int semantic_dim, int num_antennas);

}  // namespace thzsim
