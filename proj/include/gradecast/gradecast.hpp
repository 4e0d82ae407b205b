#pragma once

#include "gradecast/error.hpp"
#include "gradecast/ingest.hpp"
#include "gradecast/cart.hpp"
#include "gradecast/tree_io.hpp"
#include "gradecast/eval.hpp"
#include "gradecast/whatif.hpp"
#include "gradecast/pipeline.hpp"
#include "gradecast/json_io.hpp"
