#include <iostream>

#include "fairsignal/cli.hpp"

int main(int argc, char** argv) {
  return fairsignal::cli::run(argc, argv, std::cout, std::cerr);
}
