#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "cream/config.hpp"

namespace cream {

/// Process exit status for an engine error code: 3 input/validation,
/// 4 provider or remote backend, 5 evaluation coverage, 6 model not loaded,
/// 7 conflict, 1 anything else. Usage errors exit with 2.
int exit_code(ErrorCode code);

/// Entry point behind the `cream` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

/// tweet id -> explanation, stored as a JSON object.
ExplanationMap read_explanations(const std::filesystem::path& path);
void write_explanations(const std::filesystem::path& path, const ExplanationMap& explanations);

}  // namespace cream
