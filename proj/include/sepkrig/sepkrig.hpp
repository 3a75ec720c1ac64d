#pragma once

#include "sepkrig/error.hpp"
#include "sepkrig/grid.hpp"
#include "sepkrig/trend.hpp"
#include "sepkrig/bessel.hpp"
#include "sepkrig/linalg.hpp"
#include "sepkrig/acf.hpp"
#include "sepkrig/nelder_mead.hpp"
#include "sepkrig/spatial_fit.hpp"
#include "sepkrig/seasonal_ar.hpp"
#include "sepkrig/kriging.hpp"
#include "sepkrig/stats.hpp"
#include "sepkrig/bootstrap.hpp"
#include "sepkrig/selection.hpp"
#include "sepkrig/io.hpp"
#include "sepkrig/runtime.hpp"
