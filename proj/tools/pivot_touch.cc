#include <iostream>

#include "pivot/cli.h"

int main(int argc, char** argv) {
  return pivot::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
