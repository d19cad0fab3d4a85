#pragma once

#include "pmufog/errors.hpp"
#include "pmufog/evaluation.hpp"
#include "pmufog/frame_codec.hpp"
#include "pmufog/io.hpp"
#include "pmufog/knn.hpp"
#include "pmufog/metrics.hpp"
#include "pmufog/netsim.hpp"
#include "pmufog/pdc.hpp"
#include "pmufog/rng.hpp"
#include "pmufog/signalgen.hpp"
#include "pmufog/ssa.hpp"
#include "pmufog/wfq.hpp"
