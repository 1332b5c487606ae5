#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace grounding {

// Subcommands:
//   train --config <run.json> [--resume]
//   eval --checkpoint <ckpt> --data <jsonl> [--out <file>] [--format json|csv]
//        [--split dev|test|synthetic]
//   synth [--spec <spec.json>] --out <dir>
//   gradcheck [--seed <n>] [--tolerance <x>]
// Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace grounding
