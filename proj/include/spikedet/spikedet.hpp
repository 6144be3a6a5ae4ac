#pragma once

#include "spikedet/blocks.hpp"
#include "spikedet/conv.hpp"
#include "spikedet/denoiser.hpp"
#include "spikedet/error.hpp"
#include "spikedet/gradcheck.hpp"
#include "spikedet/graph.hpp"
#include "spikedet/network.hpp"
#include "spikedet/neuron.hpp"
#include "spikedet/normalization.hpp"
#include "spikedet/profiler.hpp"
#include "spikedet/tensor.hpp"
#include "spikedet/tensor_io.hpp"
#include "spikedet/trace.hpp"
#include "spikedet/weights.hpp"
