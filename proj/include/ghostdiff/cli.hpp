#pragma once

namespace gd::cli {

/// Entry point of the ghostdiff executable, callable in-process for tests.
/// Exit codes: 0 all checks passed, 1 a physics check failed, 2 usage or
/// configuration error, 3 insufficient data for the requested estimate.
int cli_main(int argc, const char* const* argv);

}  // namespace gd::cli
