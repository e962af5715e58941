#pragma once

// Three-layer attentive flow engine for knowledge-graph reasoning: a global
// representation flow over sampled edges, a query-conditioned sparse flow
// over visited nodes, and an attention flow steering both.

#include "neucflow/aflow.hpp"
#include "neucflow/cflow.hpp"
#include "neucflow/checkpoint.hpp"
#include "neucflow/commands.hpp"
#include "neucflow/config.hpp"
#include "neucflow/controller.hpp"
#include "neucflow/eval.hpp"
#include "neucflow/export_dot.hpp"
#include "neucflow/kg.hpp"
#include "neucflow/model.hpp"
#include "neucflow/optim.hpp"
#include "neucflow/rng.hpp"
#include "neucflow/synthetic.hpp"
#include "neucflow/tape.hpp"
#include "neucflow/tensor.hpp"
#include "neucflow/train.hpp"
#include "neucflow/uflow.hpp"
