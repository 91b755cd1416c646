#include <string>
#include <vector>

#include "agesir/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return agesir::cli::run(std::move(args));
}
