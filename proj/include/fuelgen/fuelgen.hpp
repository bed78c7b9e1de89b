#pragma once

// Umbrella header.

#include "calibrator.hpp"
#include "config.hpp"
#include "disk_index.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "gp_intensity.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "tls_ingest.hpp"
#include "union_find.hpp"
