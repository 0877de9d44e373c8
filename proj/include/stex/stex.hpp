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

// Everything in the library.

#pragma once

#include "stex/baseline.hpp"
#include "stex/common.hpp"
#include "stex/corpus.hpp"
#include "stex/desk_corpus.hpp"
#include "stex/embed.hpp"
#include "stex/exchange.hpp"
#include "stex/harness.hpp"
#include "stex/infill.hpp"
#include "stex/metrics.hpp"
#include "stex/text.hpp"
