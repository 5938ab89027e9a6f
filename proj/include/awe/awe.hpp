#pragma once

#include "awe/common.hpp"
#include "awe/eval.hpp"
#include "awe/feature.hpp"
#include "awe/graph.hpp"
#include "awe/io.hpp"
#include "awe/kernel.hpp"
#include "awe/svm.hpp"
#include "awe/train.hpp"
#include "awe/walk.hpp"
