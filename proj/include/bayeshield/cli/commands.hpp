#pragma once

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace bayeshield::cli {

//! Process exit codes.
enum ExitCode : int
{
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
};

//! Entry point shared by the executable and the tests. `args` excludes the
//! program name. Never throws; failures map to an ExitCode with a message on
//! `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct Execution
{
  std::string input_fingerprint;
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> warnings;
  //! Exit status the command itself asks for (gradcheck reports mismatches
  //! through it).
  int status = kExitOk;
};

//! Runs `command` from a fully resolved configuration. With `emit` false
//! nothing is printed or written; this is how reports are replayed.
Execution execute(const std::string& command,
                  const nlohmann::json& config,
                  bool emit,
                  std::ostream& out);

} // namespace bayeshield::cli
