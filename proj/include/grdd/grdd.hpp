#pragma once

#include "grdd/bandwidth.hpp"
#include "grdd/error.hpp"
#include "grdd/frechet.hpp"
#include "grdd/io.hpp"
#include "grdd/linalg.hpp"
#include "grdd/rdd_fuzzy.hpp"
#include "grdd/rdd_sharp.hpp"
#include "grdd/sample.hpp"
#include "grdd/simlab.hpp"
#include "grdd/spaces.hpp"
