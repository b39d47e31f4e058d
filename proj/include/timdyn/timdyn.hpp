// Umbrella header.

#pragma once

#include "timdyn/analysis.hpp"
#include "timdyn/integrate.hpp"
#include "timdyn/io.hpp"
#include "timdyn/model.hpp"
#include "timdyn/parallel.hpp"
#include "timdyn/stability.hpp"
