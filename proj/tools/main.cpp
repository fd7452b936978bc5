#include <string>
#include <vector>

#include "mrgd/cli.hpp"

int main(int argc, char** argv) {
  return mrgd::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
