#ifndef RTABC_RTABC_HPP
#define RTABC_RTABC_HPP

#include "rtabc/baselines.hpp"
#include "rtabc/common.hpp"
#include "rtabc/error_model.hpp"
#include "rtabc/geometry.hpp"
#include "rtabc/mlp.hpp"
#include "rtabc/reach_sim.hpp"
#include "rtabc/tree_pyramid.hpp"

#endif
