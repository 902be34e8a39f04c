#pragma once

#include "upq/annotation.hpp"
#include "upq/baselines.hpp"
#include "upq/dataset.hpp"
#include "upq/error.hpp"
#include "upq/evaluate.hpp"
#include "upq/io.hpp"
#include "upq/labels.hpp"
#include "upq/ledger.hpp"
#include "upq/matching.hpp"
#include "upq/metrics_upq.hpp"
#include "upq/oracle.hpp"
#include "upq/parallel.hpp"
#include "upq/pq.hpp"
#include "upq/raster.hpp"
#include "upq/segments.hpp"
#include "upq/selfcheck.hpp"
#include "upq/sweep.hpp"
#include "upq/synth.hpp"
