// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kinface/augment.hpp"
#include "kinface/checkpoint.hpp"
#include "kinface/codec.hpp"
#include "kinface/config.hpp"
#include "kinface/errors.hpp"
#include "kinface/image.hpp"
#include "kinface/labels.hpp"
#include "kinface/manifest.hpp"
#include "kinface/metrics.hpp"
#include "kinface/mlp.hpp"
#include "kinface/pipeline.hpp"
#include "kinface/png_io.hpp"
#include "kinface/rng.hpp"
#include "kinface/tensor.hpp"
