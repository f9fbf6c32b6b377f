#include <string>
#include <vector>

#include "mhd25/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mhd25::run_subcommand(args);
}
