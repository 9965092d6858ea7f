#pragma once

#include "xrayforge/align.hpp"
#include "xrayforge/compositing.hpp"
#include "xrayforge/core.hpp"
#include "xrayforge/error.hpp"
#include "xrayforge/forensics.hpp"
#include "xrayforge/image_io.hpp"
#include "xrayforge/landmarks.hpp"
#include "xrayforge/mask.hpp"
#include "xrayforge/metrics.hpp"
#include "xrayforge/pipeline.hpp"
#include "xrayforge/xray.hpp"
#include "xrayforge/synthetic.hpp"
