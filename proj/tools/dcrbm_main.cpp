#include <string>
#include <vector>

#include "dcrbm/cli.hpp"

int main(int argc, char** argv) {
  return dcrbm::cli::run(std::vector<std::string>(argv, argv + argc));
}
