#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <regex>

#include <CLI11.hpp>

#include "dro/config.hpp"
#include "dro/orchestrator.hpp"
#include "dro/report.hpp"
#include "dro/validation/suite.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kPartial = 2;

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  static const std::regex range(R"((\d+)(?:\.\.(\d+))?)");
  std::smatch m;
  if (!std::regex_match(text, m, range))
    throw dro::InputError("--seeds expects 'a..b' or a single seed, got '" + text + "'");
  const std::uint64_t a = std::stoull(m[1].str());
  const std::uint64_t b = m[2].matched ? std::stoull(m[2].str()) : a;
  if (b < a) throw dro::InputError("--seeds range is empty: " + text);
  return {a, b};
}

struct RunArgs {
  std::string config;
  std::string method;
  std::string seeds = "0";
  std::string out;
  int budget = -1;
  bool record_timing = false;
  bool reset_dt = false;
  bool verbose = false;
};

int cmd_run(const RunArgs& args) {
  dro::RunConfig base =
      args.config.empty() ? dro::RunConfig{} : dro::load_run_config(args.config);
  if (!args.method.empty()) base.method = dro::parse_method(args.method);
  if (args.budget >= 0) base.budget = args.budget;
  if (args.record_timing) base.record_timing = true;
  if (args.reset_dt) base.dt.reset_each_iter = true;
  base.validate();
  const auto [first, last] = parse_seed_range(args.seeds);

  std::filesystem::create_directories(args.out);
  const std::size_t n = static_cast<std::size_t>(last - first + 1);
  std::vector<dro::RunRecord> records(n);
  std::mutex log_mutex;
  dro::parallel_for(n, [&](std::size_t i) {
    dro::RunConfig cfg = base;
    cfg.seed = first + i;
    dro::ProgressFn progress;
    if (args.verbose)
      progress = [&](const dro::IterationRow& row) {
        std::lock_guard lock(log_mutex);
        std::cerr << dro::to_string(cfg.method) << " seed " << cfg.seed << " iter " << row.iter
                  << " y=" << row.y << " best=" << row.best << '\n';
      };
    records[i] = dro::run_method(cfg, progress);
    const std::string path =
        (std::filesystem::path(args.out) / dro::run_csv_name(cfg.method, cfg.seed)).string();
    std::ofstream csv(path);
    if (!csv) throw dro::InputError("cannot write " + path);
    dro::write_run_csv(csv, records[i], cfg.record_timing);
    std::lock_guard lock(log_mutex);
    std::cerr << dro::to_string(cfg.method) << " seed " << cfg.seed << ": "
              << (records[i].completed ? "done" : "FAILED (" + records[i].error + ")")
              << ", final best " << records[i].final_best() << '\n';
  });

  std::vector<dro::RunCurve> curves;
  bool all_ok = true;
  for (const auto& r : records) {
    curves.push_back(dro::curve_from_record(r));
    all_ok = all_ok && r.completed;
  }
  std::ofstream summary(std::filesystem::path(args.out) / "summary.csv");
  dro::write_summary_csv(summary, curves);
  return all_ok ? kOk : kPartial;
}

int cmd_report(const std::string& in_dir, const std::string& out_path) {
  const std::vector<dro::RunCurve> curves = dro::read_run_dir(in_dir);
  std::ofstream out(out_path);
  if (!out) throw dro::InputError("cannot write " + out_path);
  dro::write_report_csv(out, curves);
  return kOk;
}

int cmd_validate(std::uint64_t seed, bool quick, const std::string& out_path) {
  const auto reports = dro::validation::run_validation_suite(seed, quick);
  if (out_path.empty()) {
    dro::validation::write_reports_csv(std::cout, reports);
  } else {
    std::ofstream out(out_path);
    if (!out) throw dro::InputError("cannot write " + out_path);
    dro::validation::write_reports_csv(out, reports);
  }
  for (const auto& r : reports)
    if (!r.pass) return kPartial;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct regret optimization experiments"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one method over a range of seeds");
  run->add_option("--config", run_args.config, "JSON config (defaults apply to missing keys)");
  run->add_option("--method", run_args.method,
                  "DRO, DRO_GLOBAL, GPBO_LOGEI, GPBO_LOGEI_ROI or RANDOM (overrides config)");
  run->add_option("--seeds", run_args.seeds, "Seed range a..b (inclusive) or a single seed");
  run->add_option("--out", run_args.out, "Output directory")->required();
  run->add_option("--budget", run_args.budget, "Override the evaluation budget");
  run->add_flag("--record-timing", run_args.record_timing, "Write measured phase times");
  run->add_flag("--reset-dt", run_args.reset_dt, "Reinitialize the transformer every iteration");
  run->add_flag("-v,--verbose", run_args.verbose, "Log every evaluation to stderr");

  std::string report_in, report_out;
  auto* report = app.add_subcommand("report", "Merge run CSVs into a long-format table");
  report->add_option("--in", report_in, "Directory with <METHOD>_seed<k>.csv files")->required();
  report->add_option("--out", report_out, "Output CSV")->required();

  std::uint64_t validate_seed = 0;
  bool validate_quick = false;
  std::string validate_out;
  auto* validate = app.add_subcommand("validate", "Run the oracle suite and print its report");
  validate->add_option("--seed", validate_seed, "Seed for the random test cases");
  validate->add_flag("--quick", validate_quick, "Fewer Monte-Carlo samples");
  validate->add_option("--out", validate_out, "Write the CSV here instead of stdout");

  auto* defaults = app.add_subcommand("defaults", "Print the default config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*report) return cmd_report(report_in, report_out);
    if (*validate) return cmd_validate(validate_seed, validate_quick, validate_out);
    if (*defaults) {
      std::cout << dro::run_config_to_json(dro::RunConfig{}).dump(2) << '\n';
      return kOk;
    }
  } catch (const dro::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPartial;
  }
  return kBadInput;
}
