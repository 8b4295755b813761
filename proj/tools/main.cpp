#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) {
  return disclstm::app::run(argc, argv, std::cout, std::cerr);
}
