#pragma once

#include "disorderlab/types.hpp"
#include "disorderlab/potential.hpp"
#include "disorderlab/scattering.hpp"
#include "disorderlab/chain.hpp"
#include "disorderlab/parallel.hpp"
#include "disorderlab/estimators.hpp"
#include "disorderlab/periodic.hpp"
#include "disorderlab/thouless.hpp"
#include "disorderlab/csv.hpp"
