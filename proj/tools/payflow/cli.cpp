#include "cli.hpp"

#include "payflow/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace payflow::cli {

namespace {

struct RunArgs {
  std::string variant = "hardened";
  std::string flaws;
  std::vector<std::string> scenarios;
  bool attack_suite = false;
  std::size_t suite_seeds = 20;
  std::size_t budget = attack::kDefaultBudget;
  std::optional<std::uint64_t> seed;
  std::string report;
  std::string format = "json";
  std::optional<Tick> reconcile_every;
  std::string findings;
  std::string transcript;
};

bool write_file(const std::string& path, const std::string& text, std::ostream& err) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    err << "error: cannot write '" << path << "'\n";
    return false;
  }
  f << text;
  return bool(f);
}

std::optional<std::uint64_t> parse_seed(const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int do_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  report::RunOptions opts;
  const auto variant = actors::parse_variant(a.variant);
  if (!variant) {
    err << "error: unknown variant '" << a.variant << "'\n";
    return kExitInvalid;
  }
  if (*variant == actors::Variant::Hardened) {
    if (!a.flaws.empty()) {
      err << "error: --flaws applies to the vulnerable variant only\n";
      return kExitInvalid;
    }
    opts.config = actors::PortalConfig::hardened();
  } else {
    actors::Flaws flaws = actors::Flaws::all();
    if (!a.flaws.empty()) {
      const auto parsed = actors::Flaws::parse(a.flaws);
      if (!parsed) {
        err << "error: cannot parse --flaws '" << a.flaws << "' (expected e.g. F1,F4b)\n";
        return kExitInvalid;
      }
      flaws = *parsed;
    }
    opts.config = actors::PortalConfig::vulnerable(flaws);
  }

  if (a.seed) {
    opts.seed = *a.seed;
  } else if (const char* env = std::getenv("PAYFLOW_SEED"); env != nullptr && *env != '\0') {
    const auto s = parse_seed(env);
    if (!s) {
      err << "error: PAYFLOW_SEED must be a non-negative integer, got '" << env << "'\n";
      return kExitInvalid;
    }
    opts.seed = *s;
  }
  if (a.format != "json" && a.format != "text") {
    err << "error: --format must be json or text\n";
    return kExitInvalid;
  }
  if (a.reconcile_every && *a.reconcile_every == 0) {
    err << "error: --reconcile-every must be >= 1\n";
    return kExitInvalid;
  }
  opts.reconcile_every = a.reconcile_every;
  opts.attack_suite = a.attack_suite;
  opts.suite_seeds = a.suite_seeds;
  opts.budget = a.budget;

  std::vector<scenario::Scenario> scenarios;
  if (a.scenarios.empty()) {
    opts.scenario_paths.push_back("builtin:happy_path");
    scenarios.push_back(scenario::happy_path());
  }
  bool invalid = false;
  for (const auto& path : a.scenarios) {
    auto parsed = scenario::load_scenario(path);
    for (const auto& d : parsed.diagnostics) err << path << ":" << d.to_string() << "\n";
    if (!parsed.ok()) {
      invalid = true;
      continue;
    }
    opts.scenario_paths.push_back(path);
    scenarios.push_back(std::move(*parsed.scenario));
  }
  if (invalid) return kExitInvalid;

  const auto rep = report::run(opts, scenarios);
  const std::string body = a.format == "json" ? report::to_json(rep) : report::to_text(rep);
  if (a.report.empty()) {
    out << body;
  } else {
    if (!write_file(a.report, body, err)) return kExitInvalid;
    out << report::to_text(rep);
  }
  if (!a.findings.empty() && !write_file(a.findings, report::findings_json(rep), err)) {
    return kExitInvalid;
  }
  if (!a.transcript.empty()) {
    std::string lines;
    for (const auto& s : rep.scenarios) lines += s.transcript.to_jsonl();
    if (!write_file(a.transcript, lines, err)) return kExitInvalid;
  }
  return rep.exit_code() == 0 ? kExitOk : kExitFailed;
}

int do_validate(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
  bool ok = true;
  for (const auto& path : paths) {
    const auto diags = scenario::validate_scenario(path);
    if (diags.empty()) {
      out << path << ": ok\n";
      continue;
    }
    ok = false;
    for (const auto& d : diags) err << path << ":" << d.to_string() << "\n";
  }
  return ok ? kExitOk : kExitInvalid;
}

int do_verify(const std::string& path, std::ostream& out, std::ostream& err) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    err << "error: cannot read report '" << path << "'\n";
    return kExitInvalid;
  }
  std::ostringstream buf;
  buf << f.rdbuf();
  const auto v = report::verify_report(buf.str());
  for (const auto& failure : v.failures) err << path << ": " << failure << "\n";
  if (!v.readable) return kExitInvalid;
  out << path << ": " << v.verified << "/" << v.successes << " witnesses verified\n";
  return v.ok() ? kExitOk : kExitFailed;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Payment flow authority simulator and attack harness", "payflow"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run scenarios and optionally the attack suite");
  run_cmd->add_option("--variant", run.variant, "vulnerable or hardened")
      ->check(CLI::IsMember({"vulnerable", "hardened"}));
  run_cmd->add_option("--flaws", run.flaws, "Comma-separated flaws F1,F2,F3,F4,F4b (vulnerable only)");
  run_cmd->add_option("--scenario", run.scenarios, "Scenario JSON file (repeatable)");
  run_cmd->add_flag("--attack-suite", run.attack_suite, "Run all strategies over the seed range");
  run_cmd->add_option("--suite-seeds", run.suite_seeds, "Seeds in the suite, starting at --seed")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
  run_cmd->add_option("--budget", run.budget, "Attempt budget per strategy and seed")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  run_cmd->add_option("--seed", run.seed, "Seed (default: PAYFLOW_SEED, else 0)");
  run_cmd->add_option("--report", run.report, "Write the report here instead of stdout");
  run_cmd->add_option("--format", run.format, "json or text")
      ->check(CLI::IsMember({"json", "text"}));
  run_cmd->add_option("--reconcile-every", run.reconcile_every, "Reconcile every N ticks");
  run_cmd->add_option("--findings", run.findings, "Write discrepancies and anomalies as JSON");
  run_cmd->add_option("--transcript", run.transcript, "Write scenario transcripts as JSON lines");

  std::vector<std::string> validate_paths;
  auto* validate_cmd = app.add_subcommand("validate", "Check scenario files without running them");
  validate_cmd->add_option("paths", validate_paths, "Scenario files")->required();

  std::string verify_path;
  auto* verify_cmd = app.add_subcommand("verify", "Re-check the success witnesses in a JSON report");
  verify_cmd->add_option("report", verify_path, "Report file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run_cmd) return do_run(run, out, err);
    if (*validate_cmd) return do_validate(validate_paths, out, err);
    if (*verify_cmd) return do_verify(verify_path, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

} // namespace payflow::cli
