#pragma once

#include "sppb/bandwidth.hpp"
#include "sppb/bootstrap.hpp"
#include "sppb/config.hpp"
#include "sppb/design.hpp"
#include "sppb/kernel.hpp"
#include "sppb/math.hpp"
#include "sppb/popgen.hpp"
#include "sppb/pseudo_population.hpp"
#include "sppb/quantile.hpp"
#include "sppb/report.hpp"
#include "sppb/rng.hpp"
#include "sppb/study.hpp"
#include "sppb/version.hpp"
