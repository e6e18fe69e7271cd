#pragma once

#include "axxb/compound.hpp"
#include "axxb/datagen.hpp"
#include "axxb/errors.hpp"
#include "axxb/io.hpp"
#include "axxb/liegroup.hpp"
#include "axxb/noise.hpp"
#include "axxb/rotsolve.hpp"
#include "axxb/transsolve.hpp"
