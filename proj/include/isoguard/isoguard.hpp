#pragma once

#include "isoguard/abstract_model.hpp"
#include "isoguard/core.hpp"
#include "isoguard/explorer.hpp"
#include "isoguard/history.hpp"
#include "isoguard/isolation.hpp"
#include "isoguard/monitor.hpp"
#include "isoguard/protocol.hpp"
#include "isoguard/s2pl.hpp"
#include "isoguard/schedules.hpp"
#include "isoguard/serialize.hpp"
#include "isoguard/tapir.hpp"
