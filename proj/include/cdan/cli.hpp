/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <iosfwd>

namespace cdan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `cdan` tool (train / enhance / eval subcommands).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdan
