#include <iostream>

#include "bbat/alloc.hpp"
#include "bbat/cli.hpp"

int main(int argc, char** argv) {
  bbat::keep_heap_resident();
  return bbat::run_cli(argc, argv, std::cout, std::cerr);
}
