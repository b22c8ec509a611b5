#pragma once

namespace memda {

/// Subcommand entry point; returns a process exit code
/// (0 ok, 1 runtime failure, 2 usage or config error).
int cli_main(int argc, char** argv);

}  // namespace memda
