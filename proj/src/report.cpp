#include "dro/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

#include "dro/metrics.hpp"

namespace dro {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& s) {
  if (s.empty()) return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InputError("malformed number '" + s + "'");
  return v;
}

std::vector<double> finite(const std::vector<double>& values) {
  std::vector<double> out;
  for (double v : values)
    if (!std::isnan(v)) out.push_back(v);
  return out;
}

void put(std::ostream& out, double v) {
  if (!std::isnan(v)) out << v;
}

/// values[i][k]: run i at iteration index k (shorter runs contribute less).
template <typename Get>
std::vector<double> column(const std::vector<const RunCurve*>& runs, std::size_t k, Get get) {
  std::vector<double> col;
  for (const RunCurve* r : runs)
    if (k < r->iters.size()) col.push_back(get(*r)[k]);
  return col;
}

}  // namespace

RunCurve curve_from_record(const RunRecord& record) {
  RunCurve c;
  c.method = std::string(to_string(record.method));
  c.seed = record.seed;
  for (const IterationRow& r : record.rows) {
    c.iters.push_back(r.iter);
    c.best.push_back(r.best);
    c.regret.push_back(r.regret);
  }
  return c;
}

RunCurve parse_run_csv(std::istream& in, const std::string& method, std::uint64_t seed) {
  RunCurve c;
  c.method = method;
  c.seed = seed;
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty run CSV");
  const std::vector<std::string> header = split_csv_line(line);
  auto index_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("run CSV lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t i_iter = index_of("iter"), i_best = index_of("best"),
                    i_regret = index_of("regret");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw InputError("run CSV row has " + std::to_string(f.size()) + " fields, expected " +
                       std::to_string(header.size()));
    c.iters.push_back(std::stoi(f[i_iter]));
    c.best.push_back(parse_field(f[i_best]));
    c.regret.push_back(parse_field(f[i_regret]));
  }
  return c;
}

std::vector<RunCurve> read_run_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
  const std::regex pattern(R"(([A-Z_]+)_seed([0-9]+)\.csv)");
  std::vector<std::pair<std::pair<std::string, std::uint64_t>, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern))
      found.push_back({{m[1].str(), std::stoull(m[2].str())}, entry.path()});
  }
  if (found.empty()) throw InputError("no run CSVs (<METHOD>_seed<k>.csv) in " + dir);
  std::sort(found.begin(), found.end());
  std::vector<RunCurve> curves;
  for (const auto& [key, path] : found) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    try {
      curves.push_back(parse_run_csv(in, key.first, key.second));
    } catch (const std::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  }
  return curves;
}

void write_summary_csv(std::ostream& out, const std::vector<RunCurve>& curves) {
  out << "iter,n_seeds,best_median,best_q25,best_q75,regret_median,regret_q25,regret_q75\n";
  std::vector<const RunCurve*> runs;
  std::size_t len = 0;
  for (const RunCurve& c : curves) {
    runs.push_back(&c);
    len = std::max(len, c.iters.size());
  }
  const auto old_precision = out.precision(12);
  for (std::size_t k = 0; k < len; ++k) {
    const std::vector<double> best = column(runs, k, [](const RunCurve& r) { return r.best; });
    const std::vector<double> regret =
        finite(column(runs, k, [](const RunCurve& r) { return r.regret; }));
    out << k << ',' << best.size() << ',' << median(best) << ',' << quantile(best, 0.25) << ','
        << quantile(best, 0.75) << ',';
    if (regret.empty()) {
      out << ",,";
    } else {
      out << median(regret) << ',' << quantile(regret, 0.25) << ',' << quantile(regret, 0.75);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

void write_report_csv(std::ostream& out, const std::vector<RunCurve>& curves) {
  out << "method,seed,iter,best,regret,best_mean,best_se,regret_mean,regret_se\n";
  std::map<std::string, std::vector<const RunCurve*>> by_method;
  for (const RunCurve& c : curves) by_method[c.method].push_back(&c);
  const auto old_precision = out.precision(12);
  for (const auto& [method, runs] : by_method) {
    for (const RunCurve* r : runs) {
      for (std::size_t k = 0; k < r->iters.size(); ++k) {
        const MeanSe best = mean_se(column(runs, k, [](const RunCurve& c) { return c.best; }));
        const std::vector<double> reg =
            finite(column(runs, k, [](const RunCurve& c) { return c.regret; }));
        out << method << ',' << r->seed << ',' << r->iters[k] << ',' << r->best[k] << ',';
        put(out, r->regret[k]);
        out << ',' << best.mean << ',';
        put(out, best.se);
        out << ',';
        if (!reg.empty()) {
          const MeanSe regret = mean_se(reg);
          out << regret.mean << ',';
          put(out, regret.se);
        } else {
          out << ',';
        }
        out << '\n';
      }
    }
  }
  out.precision(old_precision);
}

}  // namespace dro
