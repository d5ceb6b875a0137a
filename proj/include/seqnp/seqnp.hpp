#pragma once

#include "seqnp/autodiff.hpp"
#include "seqnp/checkpoint.hpp"
#include "seqnp/context.hpp"
#include "seqnp/data.hpp"
#include "seqnp/defaults.hpp"
#include "seqnp/distributions.hpp"
#include "seqnp/errors.hpp"
#include "seqnp/losses.hpp"
#include "seqnp/metrics.hpp"
#include "seqnp/model.hpp"
#include "seqnp/optimizer.hpp"
#include "seqnp/rng.hpp"
#include "seqnp/split.hpp"
#include "seqnp/tensor.hpp"
#include "seqnp/training.hpp"
