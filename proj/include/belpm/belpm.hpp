#pragma once

#include "belpm/error.hpp"
#include "belpm/series.hpp"
#include "belpm/kernels.hpp"
#include "belpm/wknn.hpp"
#include "belpm/model.hpp"
#include "belpm/lse.hpp"
#include "belpm/learning.hpp"
#include "belpm/metrics.hpp"
#include "belpm/io.hpp"
#include "belpm/experiment.hpp"
