// Writes the bundled synthetic probe into a directory (default data/synthetic).
#include <iostream>

#include "ctxprobe/synthetic.hpp"

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "data/synthetic";
  try {
    ctxprobe::write_synthetic_probe(ctxprobe::make_synthetic_probe(), dir);
  } catch (const std::exception& e) {
    std::cerr << "make_synthetic: " << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}
