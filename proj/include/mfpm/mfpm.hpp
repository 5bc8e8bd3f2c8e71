#pragma once

// Umbrella header for the mean-field Pontryagin solver.

#include "mfpm/adjoint.hpp"
#include "mfpm/config.hpp"
#include "mfpm/csv.hpp"
#include "mfpm/errors.hpp"
#include "mfpm/forward.hpp"
#include "mfpm/lagrangian.hpp"
#include "mfpm/lq.hpp"
#include "mfpm/lq_oracle.hpp"
#include "mfpm/measure.hpp"
#include "mfpm/optimizer.hpp"
#include "mfpm/problem.hpp"
#include "mfpm/problems.hpp"
#include "mfpm/report.hpp"
#include "mfpm/types.hpp"
#include "mfpm/validate.hpp"
