#pragma once

#include "dualstat/datagen.hpp"
#include "dualstat/duality.hpp"
#include "dualstat/error.hpp"
#include "dualstat/estimators.hpp"
#include "dualstat/glm.hpp"
#include "dualstat/inference.hpp"
#include "dualstat/io.hpp"
#include "dualstat/lrm.hpp"
#include "dualstat/rng.hpp"
#include "dualstat/svm.hpp"
#include "dualstat/types.hpp"
#include "dualstat/voxelwise.hpp"
