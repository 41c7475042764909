// Impact of one buy metaorder under the three propagators, during execution
// and after it ends. Writes t,mode,impact rows for plotting.
#include <cmath>
#include <cstdio>
#include <string>

#include "orderflow/io.hpp"
#include "orderflow/price.hpp"

using namespace orderflow;

int main(int argc, char** argv) {
  std::string out = argc > 1 ? argv[1] : "impact_decay.csv";
  ModelParams p;
  p.tau0 = 1.0;
  p.beta1 = 0.2;
  p.lambda_prime = 0.0;

  Metaorder mo;
  mo.duration = 100.0;
  mo.sign = 1;
  mo.q = 1.0;
  mo.participation = 1.0;

  CsvTable t;
  t.header = {"t", "mode", "impact"};
  std::printf("%10s %12s %12s %12s\n", "t/s", "two_time", "standard", "permanent");
  for (double x = 0.01; x <= 100.0 * (1 + 1e-12); x *= std::pow(10.0, 0.05)) {
    double elapsed = x * mo.duration;
    double v[3];
    int k = 0;
    for (auto mode : {PropagatorMode::two_time, PropagatorMode::standard, PropagatorMode::permanent}) {
      v[k] = impact_trajectory_value(mo, elapsed, p, mode) / peak_impact(mo, p, mode);
      t.rows.push_back({format_double(x), to_string(mode), format_double(v[k])});
      ++k;
    }
    if (std::abs(std::log10(x) - std::round(std::log10(x))) < 1e-9)
      std::printf("%10g %12.5f %12.5f %12.5f\n", x, v[0], v[1], v[2]);
  }
  write_csv_table(t, out);
  std::printf("wrote %s (impact relative to the peak at t = s)\n", out.c_str());
}
