#pragma once

namespace gearpose {

/// Command-line entry point. Subcommands: gen, estimate, eval, assemble,
/// lattice, render. Every successful run writes a run_manifest.json with the
/// command, seed, config hash, and toolkit version into its output directory.
///
/// Exit codes: 0 success, 2 usage error or unknown subcommand, 3 unreadable
/// or invalid config, 4 missing dataset or input file, 5 runtime failure.
/// Failures also print a single-line JSON error record to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace gearpose
