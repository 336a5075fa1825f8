#pragma once

// Everything except the HTTP binding (annotation_server.hpp), which pulls in
// the networking headers.

#include "nomscreen/common.hpp"
#include "nomscreen/csv.hpp"
#include "nomscreen/registry.hpp"
#include "nomscreen/address.hpp"
#include "nomscreen/offshore.hpp"
#include "nomscreen/graph.hpp"
#include "nomscreen/name_match.hpp"
#include "nomscreen/population.hpp"
#include "nomscreen/features.hpp"
#include "nomscreen/knn.hpp"
#include "nomscreen/logit.hpp"
#include "nomscreen/estimator.hpp"
#include "nomscreen/annotation.hpp"
#include "nomscreen/robustness.hpp"
#include "nomscreen/synth.hpp"
#include "nomscreen/pipeline.hpp"
