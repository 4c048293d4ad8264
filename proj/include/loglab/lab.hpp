#pragma once

#include "loglab/lab/calibrate.hpp"
#include "loglab/lab/calibration.hpp"
#include "loglab/lab/config.hpp"
#include "loglab/lab/corpus.hpp"
#include "loglab/lab/experiments.hpp"
#include "loglab/lab/fields.hpp"
#include "loglab/lab/report.hpp"
