#pragma once

#include "twincal/acquisition.hpp"
#include "twincal/config.hpp"
#include "twincal/detection.hpp"
#include "twincal/electronics.hpp"
#include "twincal/errors.hpp"
#include "twincal/estimators.hpp"
#include "twincal/lsa.hpp"
#include "twincal/optics.hpp"
#include "twincal/random.hpp"
#include "twincal/report.hpp"
#include "twincal/runner.hpp"
#include "twincal/scenario.hpp"
#include "twincal/source.hpp"
#include "twincal/timebase.hpp"
