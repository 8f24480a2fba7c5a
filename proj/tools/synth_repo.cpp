// synth_repo: write the synthetic join repository used by the end-to-end tests.
//
//   synth_repo --out DIR [--seed N] [--rows N]

#include <iostream>

#include <CLI11.hpp>

#include "synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic base table, candidate tables, manifest and config"};
  std::string out;
  std::uint64_t seed = 0;
  joinaug::testing::SynthRepoOptions opts;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--rows", opts.rows, "base table rows");
  CLI11_PARSE(app, argc, argv);
  try {
    auto repo = joinaug::testing::write_synthetic_repo(out, seed, opts);
    std::cout << repo.config.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "synth_repo: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
