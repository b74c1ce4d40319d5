#include <string>
#include <vector>

#include "sphereflow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sphereflow::run_cli(args);
}
