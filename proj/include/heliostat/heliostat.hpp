#pragma once

#include "heliostat/bspline.hpp"
#include "heliostat/config.hpp"
#include "heliostat/dataset.hpp"
#include "heliostat/error.hpp"
#include "heliostat/experiments.hpp"
#include "heliostat/facet_spline.hpp"
#include "heliostat/fit.hpp"
#include "heliostat/flux.hpp"
#include "heliostat/geometry.hpp"
#include "heliostat/metrics.hpp"
#include "heliostat/normal_cloud.hpp"
#include "heliostat/parallel.hpp"
#include "heliostat/raytrace.hpp"
#include "heliostat/scene.hpp"
#include "heliostat/sunshape.hpp"
#include "heliostat/surface.hpp"
#include "heliostat/surface_io.hpp"
#include "heliostat/synth.hpp"
