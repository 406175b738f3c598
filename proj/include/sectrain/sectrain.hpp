#pragma once

#include "sectrain/aggregate.hpp"
#include "sectrain/corpus.hpp"
#include "sectrain/dedup.hpp"
#include "sectrain/distill.hpp"
#include "sectrain/longctx.hpp"
#include "sectrain/manifest.hpp"
#include "sectrain/ngram.hpp"
#include "sectrain/oracles.hpp"
#include "sectrain/pipeline.hpp"
#include "sectrain/quality.hpp"
#include "sectrain/rewards.hpp"
#include "sectrain/rlmath.hpp"
#include "sectrain/schedule.hpp"
#include "sectrain/scrub.hpp"
