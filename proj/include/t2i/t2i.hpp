#pragma once

#include "t2i/connector.hpp"
#include "t2i/error.hpp"
#include "t2i/experiment.hpp"
#include "t2i/grid.hpp"
#include "t2i/preprocess.hpp"
#include "t2i/reconstruction.hpp"
#include "t2i/registration.hpp"
#include "t2i/se2.hpp"
#include "t2i/serialization.hpp"
#include "t2i/spatial_index.hpp"
#include "t2i/tactile.hpp"
