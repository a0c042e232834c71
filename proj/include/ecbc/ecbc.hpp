#pragma once

#include "ecbc/bayes_degrees.hpp"
#include "ecbc/benchmark.hpp"
#include "ecbc/copula_core.hpp"
#include "ecbc/dependence.hpp"
#include "ecbc/errors.hpp"
#include "ecbc/io.hpp"
#include "ecbc/matrix.hpp"
#include "ecbc/portfolio.hpp"
#include "ecbc/random.hpp"
#include "ecbc/reference_copula.hpp"
#include "ecbc/sampling.hpp"
#include "ecbc/simplex.hpp"
#include "ecbc/special.hpp"
