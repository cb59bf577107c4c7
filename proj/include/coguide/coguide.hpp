#pragma once

#include "coguide/autodiff.hpp"
#include "coguide/checkpoint.hpp"
#include "coguide/config.hpp"
#include "coguide/corpus.hpp"
#include "coguide/decoding.hpp"
#include "coguide/encoder.hpp"
#include "coguide/gradcheck.hpp"
#include "coguide/gradcheck_suite.hpp"
#include "coguide/graph.hpp"
#include "coguide/hgat.hpp"
#include "coguide/loss.hpp"
#include "coguide/matrix.hpp"
#include "coguide/metrics.hpp"
#include "coguide/model.hpp"
#include "coguide/optim.hpp"
#include "coguide/params.hpp"
#include "coguide/training.hpp"
