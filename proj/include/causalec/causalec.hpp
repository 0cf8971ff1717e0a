#pragma once

#include "causalec/checker.hpp"
#include "causalec/client.hpp"
#include "causalec/codec.hpp"
#include "causalec/common.hpp"
#include "causalec/gf256.hpp"
#include "causalec/message.hpp"
#include "causalec/scenario.hpp"
#include "causalec/server.hpp"
#include "causalec/simulation.hpp"
#include "causalec/trace.hpp"
#include "causalec/types.hpp"
