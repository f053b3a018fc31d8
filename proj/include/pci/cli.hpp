#ifndef PCI_CLI_HPP
#define PCI_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace pci {

enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitIo = 2 };

// Entry point of the `pci` tool: train, evaluate, predict, plot.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pci

#endif  // PCI_CLI_HPP
