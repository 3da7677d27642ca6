#pragma once

namespace etpick {

// Entry point behind tools/etpick; factored out so tests can drive the CLI
// in-process.
int run_cli(int argc, const char* const* argv);

}  // namespace etpick
