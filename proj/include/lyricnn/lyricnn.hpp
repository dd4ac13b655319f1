#pragma once

// Umbrella header: multi-label text-emotion classification with a 1-D
// convolutional network, trained with hand-written backpropagation and Adam.

#include "lyricnn/dataset.hpp"
#include "lyricnn/emotions.hpp"
#include "lyricnn/errors.hpp"
#include "lyricnn/evaluation.hpp"
#include "lyricnn/io.hpp"
#include "lyricnn/layers.hpp"
#include "lyricnn/model.hpp"
#include "lyricnn/rng.hpp"
#include "lyricnn/tensor.hpp"
#include "lyricnn/text.hpp"
#include "lyricnn/training.hpp"
#include "lyricnn/version.hpp"
