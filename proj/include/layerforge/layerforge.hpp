/* Copyright 2026 The layerforge Authors. All Rights Reserved.

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

// Umbrella header. The HTTP refiner lives in layerforge/refiner.hpp and is
// not pulled in here.

#include "layerforge/assets.hpp"
#include "layerforge/captioning.hpp"
#include "layerforge/composer.hpp"
#include "layerforge/config.hpp"
#include "layerforge/dataset.hpp"
#include "layerforge/error.hpp"
#include "layerforge/evaluation.hpp"
#include "layerforge/geometry.hpp"
#include "layerforge/image.hpp"
#include "layerforge/metrics.hpp"
#include "layerforge/png_io.hpp"
#include "layerforge/rng.hpp"
#include "layerforge/serialization.hpp"
