#pragma once

#include "inlprobe/analysis.hpp"
#include "inlprobe/dynamics.hpp"
#include "inlprobe/error.hpp"
#include "inlprobe/hamiltonian.hpp"
#include "inlprobe/integrator.hpp"
#include "inlprobe/linalg.hpp"
#include "inlprobe/scenario.hpp"
#include "inlprobe/spin_state.hpp"
