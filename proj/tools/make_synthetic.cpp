// Regenerates data/synthetic_table1.csv: the basic model at the calibrated
// parameter values, tumor volume at days 10, 13 and 15 and fat volume at
// day 15 for both diets, without noise.

#include <fstream>
#include <iostream>

#include "estrocon/calibration.hpp"

int main(int argc, char** argv) {
  using namespace estrocon;
  const ModelParams params;
  const auto data = synthesize_measurements(params, DietInit::table(Diet::CD), DietInit::table(Diet::HFD));
  if (argc > 1) {
    std::ofstream out(argv[1]);
    if (!out) {
      std::cerr << "cannot open " << argv[1] << '\n';
      return 4;
    }
    write_measurements(out, data);
    return out ? 0 : 4;
  }
  write_measurements(std::cout, data);
  return 0;
}
