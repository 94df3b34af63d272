#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "nowcast/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nowcast: real-time macroeconomic nowcasting with calibrated uncertainty"};
  app.require_subcommand(1);

  std::string data, log_path, spec_path, out_path, config_path, origin, timestamp = "unspecified";

  auto* ingest =
      app.add_subcommand("ingest", "validate a publication batch; optionally append to a log");
  ingest->add_option("--data", data, "observation CSV batch")->required();
  ingest->add_option("--log", log_path, "log CSV to append accepted records to");

  auto* simulate = app.add_subcommand("simulate", "generate synthetic observations from a spec");
  simulate->add_option("--spec", spec_path, "simulation spec JSON")->required();
  simulate->add_option("--out", out_path, "output observation CSV path")->required();

  auto* backtest =
      app.add_subcommand("backtest", "walk-forward losses, intervals, MCS, and weights");
  backtest->add_option("--config", config_path, "run config JSON")->required();
  backtest->add_option("--timestamp", timestamp, "audit trail timestamp (ISO-8601)");

  auto* nowcast_cmd = app.add_subcommand("nowcast", "assemble one release package");
  nowcast_cmd->add_option("--config", config_path, "run config JSON")->required();
  nowcast_cmd->add_option("--origin", origin, "forecast origin date (YYYY-MM-DD)")->required();
  nowcast_cmd->add_option("--timestamp", timestamp, "audit trail timestamp (ISO-8601)");

  auto* audit = app.add_subcommand("audit", "leakage verdict and monitoring dashboard");
  audit->add_option("--config", config_path, "run config JSON")->required();
  audit->add_option("--timestamp", timestamp, "audit trail timestamp (ISO-8601)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    nowcast::detail::write_error_record(std::cerr, "validation", e.what());
    return nowcast::kExitValidation;
  }

  if (ingest->parsed()) return nowcast::cmd_ingest(data, log_path, std::cout, std::cerr);
  if (simulate->parsed())
    return nowcast::cmd_simulate(spec_path, out_path, std::cout, std::cerr);
  if (backtest->parsed())
    return nowcast::cmd_backtest(config_path, timestamp, std::cout, std::cerr);
  if (nowcast_cmd->parsed())
    return nowcast::cmd_nowcast(config_path, origin, timestamp, std::cout, std::cerr);
  if (audit->parsed()) return nowcast::cmd_audit(config_path, timestamp, std::cout, std::cerr);
  nowcast::detail::write_error_record(std::cerr, "validation", "no subcommand given");
  return nowcast::kExitValidation;
}
