#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "provmind/common.hpp"

namespace provmind {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitEndpoint = 4;

int exit_code_for(ErrorCode code);

/// Subcommands: synth, compile, genbench, split, audit, build-memory, eval,
/// ablate, report. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace provmind
