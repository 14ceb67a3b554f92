#include <iostream>

#include "stripeforge/cli.hpp"

int main(int argc, char** argv) {
  return sf::execute(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
