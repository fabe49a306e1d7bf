#pragma once

#include "greenflow/capture.hpp"
#include "greenflow/energy.hpp"
#include "greenflow/error.hpp"
#include "greenflow/features.hpp"
#include "greenflow/flowmeter.hpp"
#include "greenflow/forest.hpp"
#include "greenflow/metrics.hpp"
#include "greenflow/optimizer.hpp"
#include "greenflow/pipeline.hpp"
#include "greenflow/random.hpp"
#include "greenflow/synthetic.hpp"
