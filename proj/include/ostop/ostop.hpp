#pragma once

#include "ostop/core.hpp"
#include "ostop/diffusion.hpp"
#include "ostop/errors.hpp"
#include "ostop/expr.hpp"
#include "ostop/fundamental.hpp"
#include "ostop/levy.hpp"
#include "ostop/montecarlo.hpp"
#include "ostop/numerics.hpp"
#include "ostop/payoff.hpp"
#include "ostop/philox.hpp"
#include "ostop/representation.hpp"
#include "ostop/solver.hpp"
