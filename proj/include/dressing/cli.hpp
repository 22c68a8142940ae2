#pragma once

namespace dressing {

// Entry point for the command-line tool; returns the process exit status.
int cli_main(int argc, const char* const* argv);

}  // namespace dressing
