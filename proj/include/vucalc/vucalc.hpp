#pragma once

// Umbrella include for the vucalc library.

#include "vucalc/atoms.hpp"
#include "vucalc/chain.hpp"
#include "vucalc/dense.hpp"
#include "vucalc/errors.hpp"
#include "vucalc/fast_track.hpp"
#include "vucalc/oracles.hpp"
#include "vucalc/subdiff.hpp"
#include "vucalc/subspace.hpp"
#include "vucalc/vu.hpp"
