#pragma once

namespace xdomid {

// Parses argv and runs one pipeline subcommand. Returns a process exit
// status: 0 on success, nonzero with a one-line error on stderr otherwise.
int run_cli(int argc, char** argv);

}  // namespace xdomid
