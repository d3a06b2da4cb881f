// Copyright 2026 The refseg Authors.
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

#ifndef REFSEG_REFSEG_HPP_
#define REFSEG_REFSEG_HPP_

#include "refseg/binary_io.hpp"
#include "refseg/config.hpp"
#include "refseg/dataset.hpp"
#include "refseg/dataset_io.hpp"
#include "refseg/evaluation.hpp"
#include "refseg/language.hpp"
#include "refseg/masks.hpp"
#include "refseg/model.hpp"
#include "refseg/numerics.hpp"
#include "refseg/object_embedding.hpp"
#include "refseg/pipeline.hpp"
#include "refseg/render.hpp"
#include "refseg/tracker.hpp"
#include "refseg/training.hpp"

#endif  // REFSEG_REFSEG_HPP_
