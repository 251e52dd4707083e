#pragma once

// Core library. The dense oracle (oracle.hpp, needs Eigen) and the command
// line front end (cli.hpp, needs CLI11) are included separately.

#include "sddflow/error.hpp"
#include "sddflow/graph.hpp"
#include "sddflow/io.hpp"
#include "sddflow/memory.hpp"
#include "sddflow/path_sum_tree.hpp"
#include "sddflow/report.hpp"
#include "sddflow/sampling.hpp"
#include "sddflow/sdd.hpp"
#include "sddflow/solver.hpp"
#include "sddflow/spanning_tree.hpp"
