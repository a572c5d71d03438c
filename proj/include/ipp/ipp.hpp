#pragma once

#include "ipp/belief.hpp"
#include "ipp/bounds.hpp"
#include "ipp/envgraph.hpp"
#include "ipp/errors.hpp"
#include "ipp/harness.hpp"
#include "ipp/io.hpp"
#include "ipp/multiagent.hpp"
#include "ipp/objectives.hpp"
#include "ipp/planner.hpp"
#include "ipp/refine.hpp"
#include "ipp/report.hpp"
