#include <string>
#include <vector>

#include "elmia/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return elmia::cli::run(std::move(args));
}
