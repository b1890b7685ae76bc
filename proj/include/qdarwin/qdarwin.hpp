#pragma once

#include "qdarwin/core.hpp"
#include "qdarwin/linalg.hpp"
#include "qdarwin/rng.hpp"
#include "qdarwin/states.hpp"
#include "qdarwin/channels.hpp"
#include "qdarwin/sdp.hpp"
#include "qdarwin/infotheory.hpp"
#include "qdarwin/diamond.hpp"
#include "qdarwin/darwinism.hpp"
