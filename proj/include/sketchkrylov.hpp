#pragma once

#include "sketchkrylov/core.hpp"
#include "sketchkrylov/sparse.hpp"
#include "sketchkrylov/qr.hpp"
#include "sketchkrylov/spectral.hpp"
#include "sketchkrylov/expm.hpp"
#include "sketchkrylov/functions.hpp"
#include "sketchkrylov/funm.hpp"
#include "sketchkrylov/divided_differences.hpp"
#include "sketchkrylov/field_of_values.hpp"
#include "sketchkrylov/sketch.hpp"
#include "sketchkrylov/krylov.hpp"
#include "sketchkrylov/matfun.hpp"
#include "sketchkrylov/rank_one.hpp"
#include "sketchkrylov/experiments.hpp"
