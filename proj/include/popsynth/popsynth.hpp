#ifndef POPSYNTH_POPSYNTH_HPP
#define POPSYNTH_POPSYNTH_HPP

#include "popsynth/bayesnet.hpp"
#include "popsynth/benchgen.hpp"
#include "popsynth/dag.hpp"
#include "popsynth/dataset.hpp"
#include "popsynth/endpoint.hpp"
#include "popsynth/error.hpp"
#include "popsynth/experiment.hpp"
#include "popsynth/genmodels.hpp"
#include "popsynth/metrics.hpp"
#include "popsynth/random.hpp"
#include "popsynth/sampler.hpp"
#include "popsynth/schema.hpp"
#include "popsynth/textcodec.hpp"

#endif  // POPSYNTH_POPSYNTH_HPP
