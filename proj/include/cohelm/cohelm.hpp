// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_COHELM_HPP
#define COHELM_COHELM_HPP

#include "cohelm/quadrature.hpp"
#include "cohelm/mesh_space.hpp"
#include "cohelm/linalg.hpp"
#include "cohelm/assembly.hpp"
#include "cohelm/gmres.hpp"
#include "cohelm/eigen_extremes.hpp"
#include "cohelm/analysis.hpp"
#include "cohelm/experiments.hpp"

#endif  // COHELM_COHELM_HPP
