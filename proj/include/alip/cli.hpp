#pragma once

namespace alip {

// Entry point behind the command-line tool.  Subcommands: trajgen, lut, run,
// serve, probe.  Returns 0 on success, 1 when a closed-loop run ends in a
// fall, 2 on usage or runtime errors.
int cli_main(int argc, char** argv);

}  // namespace alip
