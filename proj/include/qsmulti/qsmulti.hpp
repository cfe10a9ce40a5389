#pragma once

#include "qsmulti/coupling.hpp"
#include "qsmulti/equilibria.hpp"
#include "qsmulti/errors.hpp"
#include "qsmulti/integrator.hpp"
#include "qsmulti/linalg.hpp"
#include "qsmulti/model.hpp"
#include "qsmulti/reproduction.hpp"
#include "qsmulti/stability.hpp"
#include "qsmulti/sweep.hpp"
#include "qsmulti/types.hpp"
