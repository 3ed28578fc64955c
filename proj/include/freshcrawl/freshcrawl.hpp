#pragma once

#include "freshcrawl/allocation.hpp"
#include "freshcrawl/error.hpp"
#include "freshcrawl/estimation.hpp"
#include "freshcrawl/experiments.hpp"
#include "freshcrawl/io.hpp"
#include "freshcrawl/learnability.hpp"
#include "freshcrawl/policies.hpp"
#include "freshcrawl/process_sim.hpp"
#include "freshcrawl/random.hpp"
