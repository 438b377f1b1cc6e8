#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace tcdc::cli {

inline constexpr std::string_view kSubcommands[] = {"synth", "flow",     "rankpool", "prepare",    "train",
                                                    "eval",  "ensemble", "gradcheck", "sweep-theta"};

std::string usage();

/// Parses argv, runs one subcommand and returns the process exit code
/// (0 ok, 1 usage/config, 2 data, 3 numeric). Never throws.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace tcdc::cli
