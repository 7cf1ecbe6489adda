#pragma once

#include "stochint/basis.hpp"
#include "stochint/expansion.hpp"
#include "stochint/experiments.hpp"
#include "stochint/fourier.hpp"
#include "stochint/levy_area.hpp"
#include "stochint/milstein.hpp"
#include "stochint/oracle.hpp"
#include "stochint/parallel.hpp"
#include "stochint/quadrature.hpp"
#include "stochint/rng.hpp"
#include "stochint/wiener_expansion.hpp"
