#pragma once

#include "error.hpp"
#include "pn_profile.hpp"
#include "spectral_jitter.hpp"
#include "noise_synth.hpp"
#include "adpll_sim.hpp"
#include "feasibility.hpp"
#include "io.hpp"
#include "svg_plot.hpp"
