#pragma once

#include "ote/corpus_io.hpp"
#include "ote/cvsearch.hpp"
#include "ote/error.hpp"
#include "ote/evaluate.hpp"
#include "ote/features.hpp"
#include "ote/induce_brown.hpp"
#include "ote/induce_kmeans.hpp"
#include "ote/io.hpp"
#include "ote/lexicon.hpp"
#include "ote/tagger.hpp"

#define OTE_VERSION "0.1.0"
