#pragma once

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/metrics.hpp"
#include "riskref/referral.hpp"
#include "riskref/resample.hpp"
#include "riskref/rng.hpp"
#include "riskref/uncertainty.hpp"
#include "riskref/toybnn/autodiff.hpp"
#include "riskref/toybnn/divergence.hpp"
#include "riskref/toybnn/mlp.hpp"
#include "riskref/toybnn/objectives.hpp"
#include "riskref/toybnn/synthetic.hpp"
#include "riskref/toybnn/train.hpp"
