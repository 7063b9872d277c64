#pragma once

#include "exactpen/errors.hpp"
#include "exactpen/core_model.hpp"
#include "exactpen/functionals.hpp"
#include "exactpen/inclusion.hpp"
#include "exactpen/certificates.hpp"
#include "exactpen/solver.hpp"
#include "exactpen/plateau.hpp"
#include "exactpen/catalog.hpp"
#include "exactpen/io.hpp"
