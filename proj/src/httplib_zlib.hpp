#pragma once

// Single point where httplib is configured, so every TU agrees on the
// feature macros.
#ifndef CPPHTTPLIB_ZLIB_SUPPORT
#define CPPHTTPLIB_ZLIB_SUPPORT
#endif
#include "httplib.h"
