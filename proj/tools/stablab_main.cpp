#include <string>
#include <vector>

#include "stablab/lab.hpp"

int main(int argc, char** argv) {
  return stablab::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
