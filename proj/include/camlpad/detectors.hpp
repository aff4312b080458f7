#pragma once

#include "camlpad/detectors/cblof.hpp"
#include "camlpad/detectors/hbos.hpp"
#include "camlpad/detectors/isolation_forest.hpp"
#include "camlpad/detectors/kmeans.hpp"
#include "camlpad/detectors/pca.hpp"
