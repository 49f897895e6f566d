#pragma once

#include <string>
#include <vector>

namespace ddlqr {

// Command-line entry point shared by the binary and the tests.
// Subcommands: simulate, collect, project, pi, vi, oracle, trajgen, study.
// Returns 0 on success, 1 on validation errors, 2 on numerical failures.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace ddlqr
