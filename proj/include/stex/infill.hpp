// Copyright 2026 The stex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Text infilling: seq2seq models, training, decoding and checkpoints.

#pragma once

#include "stex/infill/attention.hpp"
#include "stex/infill/checkpoint.hpp"
#include "stex/infill/decode.hpp"
#include "stex/infill/gru.hpp"
#include "stex/infill/model.hpp"
#include "stex/infill/tape.hpp"
#include "stex/infill/train.hpp"
#include "stex/infill/transformer.hpp"
