#pragma once

#include "adaptive.hpp"
#include "estimation.hpp"
#include "fisher.hpp"
#include "gaussian.hpp"
#include "linalg.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "typicality.hpp"
