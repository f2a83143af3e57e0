#pragma once

// Umbrella header for the pixel-aligned implicit field toolkit.

#include "pifield/bvh.hpp"
#include "pifield/camera.hpp"
#include "pifield/config.hpp"
#include "pifield/extract.hpp"
#include "pifield/featext.hpp"
#include "pifield/field.hpp"
#include "pifield/image.hpp"
#include "pifield/math.hpp"
#include "pifield/mesh.hpp"
#include "pifield/metrics.hpp"
#include "pifield/occupancy.hpp"
#include "pifield/parallel.hpp"
#include "pifield/pipeline.hpp"
#include "pifield/render.hpp"
#include "pifield/rng.hpp"
#include "pifield/sampler.hpp"
#include "pifield/shapes.hpp"
#include "pifield/tensor_io.hpp"
#include "pifield/train.hpp"
