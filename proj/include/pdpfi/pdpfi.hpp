#pragma once

#include "pdpfi/coverage.hpp"
#include "pdpfi/dataset.hpp"
#include "pdpfi/dgp.hpp"
#include "pdpfi/forest.hpp"
#include "pdpfi/inference.hpp"
#include "pdpfi/learner_spec.hpp"
#include "pdpfi/linear.hpp"
#include "pdpfi/model.hpp"
#include "pdpfi/pd.hpp"
#include "pdpfi/pfi.hpp"
#include "pdpfi/refit.hpp"
#include "pdpfi/resampling.hpp"
#include "pdpfi/simulate.hpp"
#include "pdpfi/tree.hpp"
