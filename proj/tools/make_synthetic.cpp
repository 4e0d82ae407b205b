// Writes the bundled synthetic student export to standard output.

#include <iostream>

#include "gradecast/synthetic.hpp"

int main() {
  std::cout << gradecast::synthetic::generate_csv();
  return 0;
}
