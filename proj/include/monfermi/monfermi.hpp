#pragma once

#include "monfermi/lattice.hpp"
#include "monfermi/slater.hpp"
#include "monfermi/noise.hpp"
#include "monfermi/stats.hpp"
#include "monfermi/unraveling.hpp"
#include "monfermi/fock.hpp"
#include "monfermi/ensemble.hpp"
#include "monfermi/verify.hpp"
#include "monfermi/io.hpp"
