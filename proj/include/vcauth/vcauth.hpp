#pragma once

// Umbrella header.

#include "vcauth/cheat.hpp"
#include "vcauth/crypto.hpp"
#include "vcauth/image.hpp"
#include "vcauth/pbm.hpp"
#include "vcauth/protocol.hpp"
#include "vcauth/random_grid.hpp"
#include "vcauth/random_source.hpp"
#include "vcauth/scenario.hpp"
#include "vcauth/wire.hpp"
