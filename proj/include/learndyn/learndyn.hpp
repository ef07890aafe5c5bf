#ifndef LEARNDYN_LEARNDYN_HPP
#define LEARNDYN_LEARNDYN_HPP

#include "learndyn/builtin_games.hpp"
#include "learndyn/chain_analysis.hpp"
#include "learndyn/coverage.hpp"
#include "learndyn/cycles.hpp"
#include "learndyn/dynamics.hpp"
#include "learndyn/errors.hpp"
#include "learndyn/experiment.hpp"
#include "learndyn/fixtures.hpp"
#include "learndyn/format.hpp"
#include "learndyn/game.hpp"
#include "learndyn/profile.hpp"
#include "learndyn/rng.hpp"

#endif  // LEARNDYN_LEARNDYN_HPP
