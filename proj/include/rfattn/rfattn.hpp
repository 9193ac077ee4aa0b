#pragma once

#include "rfattn/errors.hpp"
#include "rfattn/experiments.hpp"
#include "rfattn/features.hpp"
#include "rfattn/geometry.hpp"
#include "rfattn/kernels.hpp"
#include "rfattn/learner.hpp"
#include "rfattn/linalg.hpp"
#include "rfattn/parallel.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/special.hpp"
#include "rfattn/targets.hpp"
#include "rfattn/text.hpp"
