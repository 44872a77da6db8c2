#pragma once

#include "junctio/expr.hpp"
#include "junctio/grid.hpp"
#include "junctio/hjb.hpp"
#include "junctio/io.hpp"
#include "junctio/junction.hpp"
#include "junctio/model.hpp"
#include "junctio/parallel.hpp"
#include "junctio/relay.hpp"
#include "junctio/verify.hpp"
