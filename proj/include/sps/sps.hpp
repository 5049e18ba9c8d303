#pragma once

#include "sps/config.hpp"
#include "sps/defaults.hpp"
#include "sps/error.hpp"
#include "sps/eval.hpp"
#include "sps/gatekeeper.hpp"
#include "sps/manifest.hpp"
#include "sps/pipeline.hpp"
#include "sps/pooling.hpp"
#include "sps/random.hpp"
#include "sps/sampler.hpp"
#include "sps/scoring.hpp"
#include "sps/subspace.hpp"
#include "sps/tensor.hpp"
#include "sps/text.hpp"
#include "sps/theory.hpp"
