#pragma once

#include "coughxai/audio_io.hpp"
#include "coughxai/cnn.hpp"
#include "coughxai/config.hpp"
#include "coughxai/errors.hpp"
#include "coughxai/features.hpp"
#include "coughxai/fixture.hpp"
#include "coughxai/grid.hpp"
#include "coughxai/groups.hpp"
#include "coughxai/matrix_io.hpp"
#include "coughxai/pipeline.hpp"
#include "coughxai/report_io.hpp"
#include "coughxai/spectrogram.hpp"
#include "coughxai/stats.hpp"
#include "coughxai/text_format.hpp"
#include "coughxai/xai.hpp"
