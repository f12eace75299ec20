#pragma once

// Fractional diffusion on directed graphs via desingularized rational Krylov
// methods. Header-only; include this file for the whole library.

#include "fracdiff/error.hpp"
#include "fracdiff/sparse.hpp"
#include "fracdiff/matrix_market.hpp"
#include "fracdiff/laplacian.hpp"
#include "fracdiff/direct_solver.hpp"
#include "fracdiff/matfun.hpp"
#include "fracdiff/poles.hpp"
#include "fracdiff/krylov.hpp"
#include "fracdiff/desingularize.hpp"
#include "fracdiff/spectral.hpp"
#include "fracdiff/harness.hpp"
#include "fracdiff/cli.hpp"
