#include <cstdlib>

#include "nrs/acceptance.hpp"

int main(int argc, char** argv) {
  int workers = 4;
  if (argc > 1) workers = std::atoi(argv[1]);
  const auto results = nrs::run_acceptance(workers);
  return nrs::print_acceptance(results) ? 0 : 1;
}
