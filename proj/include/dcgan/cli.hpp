#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dcgan {

enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,  // bad usage, bad input, bad configuration
    kExitNumerical = 2,   // NaN/Inf, indefinite matrix, failed gradient check
};

/// Runs `dcgan <subcommand> ...`. args[0] is the program name. Results go to
/// `out`; the effective configuration, progress and errors go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcgan
