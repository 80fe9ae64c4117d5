#pragma once

// Umbrella header.

#include "localgcl/bench.hpp"
#include "localgcl/common.hpp"
#include "localgcl/dataset.hpp"
#include "localgcl/eig.hpp"
#include "localgcl/eval.hpp"
#include "localgcl/fwht.hpp"
#include "localgcl/graph.hpp"
#include "localgcl/kernel.hpp"
#include "localgcl/kernel_checks.hpp"
#include "localgcl/loss.hpp"
#include "localgcl/nn.hpp"
#include "localgcl/rng.hpp"
