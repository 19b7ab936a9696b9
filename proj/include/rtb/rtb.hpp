#pragma once

#include "rtb/classifier.hpp"
#include "rtb/data_model.hpp"
#include "rtb/error.hpp"
#include "rtb/io.hpp"
#include "rtb/metrics.hpp"
#include "rtb/parallel.hpp"
#include "rtb/protocols.hpp"
#include "rtb/report.hpp"
#include "rtb/synthetic.hpp"
