// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

// Umbrella header.

#ifndef MSCAT_MSCAT_HPP
#define MSCAT_MSCAT_HPP

#include "mscat/bem.hpp"
#include "mscat/container.hpp"
#include "mscat/core.hpp"
#include "mscat/dataset.hpp"
#include "mscat/features.hpp"
#include "mscat/fieldgrid.hpp"
#include "mscat/geometry.hpp"
#include "mscat/gmres.hpp"
#include "mscat/graphs.hpp"
#include "mscat/metrics.hpp"
#include "mscat/nn/layers.hpp"
#include "mscat/nn/model.hpp"
#include "mscat/nn/tensor.hpp"
#include "mscat/nn/train.hpp"
#include "mscat/problems.hpp"
#include "mscat/quadrature.hpp"
#include "mscat/selftest.hpp"

#endif  // MSCAT_MSCAT_HPP
