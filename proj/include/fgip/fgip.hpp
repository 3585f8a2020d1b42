#pragma once

// Factor-graph image prior: piecewise-smooth MAP estimation with locally
// adapted scale parameters, plus the denoising / enhancement / inpainting
// applications built on it.

#include "fgip/augmented.hpp"
#include "fgip/basic.hpp"
#include "fgip/cg.hpp"
#include "fgip/chain_smoother.hpp"
#include "fgip/common.hpp"
#include "fgip/grid.hpp"
#include "fgip/image_io.hpp"
#include "fgip/metrics.hpp"
#include "fgip/model.hpp"
#include "fgip/noise.hpp"
#include "fgip/nup.hpp"
#include "fgip/operators.hpp"
#include "fgip/parallel.hpp"
#include "fgip/params.hpp"
#include "fgip/phi.hpp"
#include "fgip/synthetic.hpp"
#include "fgip/tasks.hpp"
