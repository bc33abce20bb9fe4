// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "asd/analysis.hpp"
#include "asd/audio_io.hpp"
#include "asd/autoencoder.hpp"
#include "asd/classifier_head.hpp"
#include "asd/dsp.hpp"
#include "asd/embedding.hpp"
#include "asd/eval.hpp"
#include "asd/lof.hpp"
#include "asd/neural.hpp"
#include "asd/pipeline_config.hpp"
#include "asd/store.hpp"
#include "asd/synth.hpp"
#include "asd/tables.hpp"
