#pragma once

#include "moyal_lab/config.hpp"
#include "moyal_lab/errors.hpp"
#include "moyal_lab/grid.hpp"
#include "moyal_lab/grid_io.hpp"
#include "moyal_lab/hamiltonian.hpp"
#include "moyal_lab/measurement.hpp"
#include "moyal_lab/moyal_evolution.hpp"
#include "moyal_lab/parallel.hpp"
#include "moyal_lab/phase_space.hpp"
#include "moyal_lab/random.hpp"
#include "moyal_lab/runner.hpp"
#include "moyal_lab/schrodinger.hpp"
#include "moyal_lab/smearing.hpp"
#include "moyal_lab/warnings.hpp"
