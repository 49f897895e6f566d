#include <string>
#include <vector>

#include "ddlqr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ddlqr::cli_dispatch(args);
}
