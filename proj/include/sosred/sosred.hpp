#pragma once

#include "cert.hpp"
#include "io.hpp"
#include "linsys.hpp"
#include "moas.hpp"
#include "mpc.hpp"
#include "oracle.hpp"
#include "poly.hpp"
#include "sdp.hpp"
#include "sos.hpp"
