// ard: attracting/repelling decomposition of interval maps.
//
//   ard analyze --map maps/x2.json --report out.json [--csv v.csv] [--graph-dump g.txt]
//   ard verify  --map maps/x2.json
//   ard sample  --map maps/x2.json --csv v.csv
//
// Exit status: 0 all suites passed, 1 some suite failed, 2 usage/input error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ard/pipeline.hpp"

namespace {

void add_common(CLI::App* cmd, ard::RunConfig& cfg, std::string& map) {
  cmd->add_option("--map", map, "map definition (JSON)")->required();
  cmd->add_option("--boxes", cfg.n_boxes, "boxes in the working cover (power of two)");
  cmd->add_option("--depth", cfg.max_depth, "maximum number of levels");
  cmd->add_option("--max-return", cfg.max_return, "return-time bound for the renormalization search");
  cmd->add_option("--sup-horizon", cfg.sup_horizon, "orbit length for h (N_h)");
  cmd->add_option("--series-horizon", cfg.series_horizon, "terms of the V series (N_V)");
  cmd->add_option("--samples", cfg.samples, "random samples per suite and CSV grid intervals");
  cmd->add_option("--seed", cfg.seed, "random seed");
}

void print_summary(const ard::Report& rep, std::ostream& os) {
  if (rep.chain) {
    const auto& ch = *rep.chain;
    os << "levels: " << ch.level_count();
    if (ch.transitive()) os << " (transitive)";
    if (ch.truncated) os << " (truncated)";
    os << '\n';
  }
  for (const auto& e : rep.errors) os << "error [" << e.stage << "] " << e.type << ": " << e.message << '\n';
  for (const auto& s : rep.suites) {
    os << (s.passed ? "PASS " : "FAIL ") << s.name;
    if (!s.applicable) os << " (n/a)";
    if (!s.note.empty()) os << " - " << s.note;
    os << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attracting/repelling decomposition, alpha-limit sets and Lyapunov functions of interval maps"};
  app.require_subcommand(1);

  ard::RunConfig cfg;
  std::string map, report, csv, graph;

  auto* analyze = app.add_subcommand("analyze", "full pipeline: chain, renormalization, Lyapunov, suites");
  add_common(analyze, cfg, map);
  analyze->add_option("--report", report, "JSON report path");
  analyze->add_option("--csv", csv, "Lyapunov CSV path");
  analyze->add_option("--graph-dump", graph, "transition graph edge list path");

  auto* verify = app.add_subcommand("verify", "run the verification suites and print pass/fail");
  add_common(verify, cfg, map);
  verify->add_option("--report", report, "JSON report path");

  auto* sample = app.add_subcommand("sample", "write the Lyapunov CSV only");
  add_common(sample, cfg, map);
  sample->add_option("--csv", csv, "Lyapunov CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    cfg.map_file = map;
    if (!report.empty()) cfg.report_path = report;
    if (!csv.empty()) cfg.csv_path = csv;
    if (!graph.empty()) cfg.graph_dump_path = graph;
    cfg.validate();
    ard::PiecewiseMap f = ard::load_map(cfg.map_file);

    if (sample->parsed()) {
      ard::LyapunovOptions lo;
      lo.sup_horizon = cfg.sup_horizon;
      lo.series_horizon = cfg.series_horizon;
      ard::ARChain chain = ard::leveled_decomposition(f, cfg.max_depth, cfg.n_boxes);
      ard::LyapunovEvaluator ev = ard::LyapunovEvaluator::from_chain(chain, lo);
      ard::detail::check_writable(*cfg.csv_path);
      ard::detail::atomic_write(*cfg.csv_path,
                                [&](std::ostream& os) { ard::write_lyapunov_csv(os, f, ev, cfg.samples); });
      return 0;
    }

    ard::Report rep = ard::run_pipeline(f, cfg);
    ard::emit(rep, f, cfg);
    print_summary(rep, std::cout);
    return rep.passed() ? 0 : 1;
  } catch (const ard::SchemaError& e) {
    std::cerr << "invalid map: " << e.what() << '\n';
    return 2;
  } catch (const ard::UsageError& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return 2;
  } catch (const ard::IoError& e) {
    std::cerr << "i/o: " << e.what() << '\n';
    return 2;
  } catch (const ard::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
