#pragma once

#include "lspm/linalg.hpp"
#include "lspm/network.hpp"
#include "lspm/shrinkage.hpp"
#include "lspm/model.hpp"
#include "lspm/initializer.hpp"
#include "lspm/sampler.hpp"
#include "lspm/postprocess.hpp"
#include "lspm/ppc.hpp"
#include "lspm/simulate.hpp"
#include "lspm/io.hpp"
#include "lspm/pipeline.hpp"
