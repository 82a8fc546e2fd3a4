#pragma once

#include "gated/distributions.hpp"
#include "gated/errors.hpp"
#include "gated/giqueue.hpp"
#include "gated/io.hpp"
#include "gated/linsys.hpp"
#include "gated/mgqueue.hpp"
#include "gated/quadrature.hpp"
#include "gated/random.hpp"
#include "gated/simulator.hpp"
