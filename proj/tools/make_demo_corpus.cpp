// Writes a procedural face corpus usable by `xrayforge generate`.
#include <iostream>

#include "CLI11.hpp"
#include "xrayforge/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic face corpus (images + landmark files)", "make_demo_corpus"};
  std::string dir;
  int count = 40, size = 128, sources = 0;
  std::uint64_t seed = 1;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("-n,--count", count, "Number of faces")->check(CLI::PositiveNumber);
  app.add_option("--size", size, "Image side in pixels")->check(CLI::Range(32, 4096));
  app.add_option("--seed", seed, "Seed");
  app.add_option("--sources", sources, "Tag faces with this many provenance groups (0 = none)");
  CLI11_PARSE(app, argc, argv);
  xrayforge::synthetic::write_corpus(dir, count, size, seed, sources);
  std::cout << "wrote " << count << " faces to " << dir << "\n";
  return 0;
}
