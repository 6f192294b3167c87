#pragma once

#include "kneehar/activity.hpp"
#include "kneehar/classifiers/model.hpp"
#include "kneehar/config.hpp"
#include "kneehar/dataset_io.hpp"
#include "kneehar/error.hpp"
#include "kneehar/evaluation.hpp"
#include "kneehar/features.hpp"
#include "kneehar/matrix.hpp"
#include "kneehar/pipeline.hpp"
#include "kneehar/report.hpp"
#include "kneehar/signal.hpp"
