#pragma once

#include <ostream>

namespace lrd {

/// Entry point of the `lrd` tool. Subcommands: synth, reconstruct, inpaint,
/// metrics, bank. Returns 0 on success, 1 on runtime failure, 2 on usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lrd
