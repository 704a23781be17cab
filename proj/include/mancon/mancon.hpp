#pragma once

// Umbrella header: consensus over compact submanifolds with Riemannian and
// projected gradient methods, plus the empirical regularity verifier.

#include "mancon/error.hpp"
#include "mancon/types.hpp"
#include "mancon/manifold.hpp"
#include "mancon/mixing.hpp"
#include "mancon/problem.hpp"
#include "mancon/algorithms.hpp"
#include "mancon/verify.hpp"
#include "mancon/io.hpp"
#include "mancon/suite.hpp"
