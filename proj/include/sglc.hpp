#pragma once

#include <sglc/config.hpp>
#include <sglc/error.hpp>
#include <sglc/external.hpp>
#include <sglc/grid.hpp>
#include <sglc/image.hpp>
#include <sglc/image_io.hpp>
#include <sglc/loss.hpp>
#include <sglc/metrics.hpp>
#include <sglc/parallel.hpp>
#include <sglc/pipeline.hpp>
#include <sglc/processor.hpp>
#include <sglc/pyramid.hpp>
#include <sglc/rng.hpp>
#include <sglc/scattering.hpp>
#include <sglc/ssl.hpp>
#include <sglc/tensor.hpp>
#include <sglc/window.hpp>
