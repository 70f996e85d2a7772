#pragma once

#include "magsob/error.hpp"
#include "magsob/vec.hpp"
#include "magsob/fields.hpp"
#include "magsob/quadrature.hpp"
#include "magsob/kernels.hpp"
#include "magsob/functionals.hpp"
#include "magsob/studies.hpp"
#include "magsob/config.hpp"
#include "magsob/cli.hpp"
