#pragma once

#include "regretlab/analysis.hpp"
#include "regretlab/confidence.hpp"
#include "regretlab/envs.hpp"
#include "regretlab/errors.hpp"
#include "regretlab/evi.hpp"
#include "regretlab/experiment.hpp"
#include "regretlab/io.hpp"
#include "regretlab/learner.hpp"
#include "regretlab/mdp.hpp"
#include "regretlab/metrics.hpp"
#include "regretlab/planning.hpp"
#include "regretlab/rng.hpp"
