#pragma once

#include "floodsense/corpus.hpp"
#include "floodsense/expand.hpp"
#include "floodsense/geoloc.hpp"
#include "floodsense/lexicon.hpp"
#include "floodsense/mediafilter.hpp"
#include "floodsense/monitor.hpp"
#include "floodsense/pipeline.hpp"
#include "floodsense/reference_cases.hpp"
#include "floodsense/report.hpp"
