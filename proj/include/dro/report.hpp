#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dro/orchestrator.hpp"

namespace dro {

/// best/regret trajectory of one (method, seed) run as read back from CSV.
struct RunCurve {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<int> iters;
  std::vector<double> best;
  /// NaN where the CSV field is empty.
  std::vector<double> regret;
};

RunCurve curve_from_record(const RunRecord& record);
RunCurve parse_run_csv(std::istream& in, const std::string& method, std::uint64_t seed);

/// Reads every `<METHOD>_seed<k>.csv` in `dir`, ordered by method then seed.
/// Throws InputError when none is found.
std::vector<RunCurve> read_run_dir(const std::string& dir);

/// Per iteration: seed count, median and quartiles of best and regret.
void write_summary_csv(std::ostream& out, const std::vector<RunCurve>& curves);

/// Long format `method,seed,iter,best,regret,best_mean,best_se,regret_mean,regret_se`
/// with mean and standard error across the seeds of each method; the standard
/// error is left empty for a single seed.
void write_report_csv(std::ostream& out, const std::vector<RunCurve>& curves);

}  // namespace dro
