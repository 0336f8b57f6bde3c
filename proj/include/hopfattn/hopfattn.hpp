#pragma once

#include "hopfattn/analysis.hpp"
#include "hopfattn/attention.hpp"
#include "hopfattn/control.hpp"
#include "hopfattn/decomposition.hpp"
#include "hopfattn/dynamics.hpp"
#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"
#include "hopfattn/parallel.hpp"
#include "hopfattn/random.hpp"
#include "hopfattn/report.hpp"
#include "hopfattn/stability.hpp"
#include "hopfattn/table.hpp"
#include "hopfattn/tensor_io.hpp"
