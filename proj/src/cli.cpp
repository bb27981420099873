#include "epplan/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "epplan/baselines.hpp"
#include "epplan/config.hpp"
#include "epplan/synthgen.hpp"

namespace epplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Query text, or the first query of a file when `arg` names one.
Query read_query(const std::string& arg) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) {
    std::ifstream in(arg);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto batch = parse_query_batch(buf.str());
    if (batch.empty()) throw UsageError("no query in " + arg);
    return batch.front();
  }
  return parse_query(arg);
}

SystemOptions load_options(const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed) {
  SystemOptions options;
  if (const char* path = std::getenv("EPPLAN_CONFIG"); path && *path) apply_config_file(options, path);
  for (const auto& o : overrides) apply_assignment(options, o);
  if (seed) options.seed = *seed;
  options.planner.validate();
  return options;
}

TraceStore open_trace(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("trace not found: " + path);
  return load_trace(path);
}

std::string series_csv(const std::vector<RunReport>& reports) {
  std::ostringstream os;
  os << std::setprecision(10) << "system,start,end,action,cost\n";
  for (const auto& r : reports)
    for (const auto& c : r.chunks)
      os << r.system << ',' << c.chunk.start << ',' << c.chunk.end << ',' << to_string(c.action) << ',' << c.cost
         << '\n';
  return os.str();
}

void print_table(std::ostream& out, const std::vector<RunReport>& reports) {
  out << std::left << std::setw(12) << "system" << std::right << std::setw(12) << "opt_cost" << std::setw(12)
      << "exec_cost" << std::setw(12) << "total" << std::setw(10) << "prec" << std::setw(10) << "recall"
      << std::setw(10) << "f1" << std::setw(10) << "speedup" << '\n';
  out << std::fixed;
  for (const auto& r : reports) {
    out << std::left << std::setw(12) << r.system << std::right << std::setprecision(2) << std::setw(12) << r.opt_cost
        << std::setw(12) << r.exec_cost << std::setw(12) << r.total_cost << std::setprecision(4) << std::setw(10)
        << r.metrics.precision << std::setw(10) << r.metrics.recall << std::setw(10) << r.metrics.f1
        << std::setprecision(2) << std::setw(10) << r.speedup_vs_naive << '\n';
  }
  out << std::defaultfloat;
}

struct GenArgs {
  std::string regime;
  FrameId frames = 12800;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  ScenarioSpec spec;
  std::string query_text;
  if (auto w = find_workload(a.regime, a.frames, a.seed)) {
    spec = w->spec;
    query_text = w->query;
  } else if (auto r = parse_regime(a.regime)) {
    spec = preset(*r, a.frames, a.seed);
    query_text = target_query(spec);
  } else if (a.regime == "random") {
    spec = random_spec(a.seed);
    query_text = target_query(spec);
  } else {
    throw UsageError("unknown regime '" + a.regime +
                     "' (expected frequent_easy, frequent_hard, rare_hard, q1..q4 or random)");
  }
  const auto store = generate(spec);
  write_trace(store, a.out);
  const auto c = census(store, parse_query(query_text));
  json j{{"trace", a.out},   {"frames", c.frames}, {"positives", c.positives}, {"positive_fraction", c.positive_fraction},
         {"query", query_text}, {"seed", a.seed}};
  out << j.dump() << '\n';
  return 0;
}

struct RunArgs {
  std::string trace;
  std::string query;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string json_path;
  std::string csv_path;
};

int cmd_plan(const RunArgs& a, std::ostream& out) {
  const auto store = open_trace(a.trace);
  const auto query = read_query(a.query);
  const auto options = load_options(a.overrides, a.seed);
  std::optional<EPEstimator> est;
  if (options.planner.selection_mode == SelectionMode::estimate)
    est = train(balanced_training_set(store, query, options.train_size, options.seed), store.exit_point_count(),
                options.train);
  const auto result = plan(store, query, options.planner, est ? &*est : nullptr);
  json j;
  j["plan"] = json::parse(plan_to_json(result.plan));
  j["opt_cost"] = result.report.opt_cost;
  j["inference_calls"] = result.report.inference_calls;
  j["samples_evaluated"] = result.report.samples_evaluated;
  j["initial_rate"] = result.report.initial_rate;
  j["max_depth_bound"] = result.report.max_depth_bound;
  j["max_rate_used"] = result.report.max_rate_used;
  j["recursion_depth_max"] = result.report.recursion_depth_max;
  j["estimator_calls"] = result.report.estimator_calls;
  j["config"] = effective_config(options);
  const auto text = j.dump(2) + "\n";
  if (a.json_path.empty()) out << text;
  else write_atomically(a.json_path, text);
  return 0;
}

int cmd_run(const RunArgs& a, const std::string& system, std::ostream& out) {
  if (!is_system(system)) throw UsageError("unknown system '" + system + "'");
  if (!a.json_path.empty() && a.json_path == a.csv_path) throw UsageError("--json and --csv name the same file");
  const auto store = open_trace(a.trace);
  const auto query = read_query(a.query);
  const auto options = load_options(a.overrides, a.seed);
  auto report = run_system(system, store, query, options);
  report.config = effective_config(options);
  const auto text = report_to_json(report) + "\n";
  if (a.json_path.empty()) out << text;
  else write_atomically(a.json_path, text);
  if (!a.csv_path.empty()) write_atomically(a.csv_path, report_csv_header() + "\n" + report_csv_row(report) + "\n");
  return 0;
}

int cmd_compare(const RunArgs& a, const std::vector<std::string>& systems, const std::string& series_path,
                std::ostream& out) {
  std::set<std::string> paths;
  for (const auto* p : {&a.json_path, &a.csv_path, &series_path})
    if (!p->empty() && !paths.insert(fs::weakly_canonical(*p).string()).second)
      throw UsageError("conflicting output paths: " + *p + " is used twice");
  for (const auto& s : systems)
    if (!is_system(s)) throw UsageError("unknown system '" + s + "'");

  const auto store = open_trace(a.trace);
  const auto query = read_query(a.query);
  const auto options = load_options(a.overrides, a.seed);

  std::vector<std::future<RunReport>> jobs;
  for (const auto& s : systems)
    jobs.push_back(std::async(std::launch::async, [&, s] { return run_system(s, store, query, options); }));
  std::vector<RunReport> reports;
  for (auto& j : jobs) reports.push_back(j.get());

  print_table(out, reports);
  if (!a.json_path.empty()) {
    json j;
    j["query"] = render_query(query);
    j["trace"] = a.trace;
    j["config"] = effective_config(options);
    j["rows"] = json::array();
    for (const auto& r : reports) j["rows"].push_back(json::parse(report_to_json(r, false)));
    write_atomically(a.json_path, j.dump(2) + "\n");
  }
  if (!a.csv_path.empty()) {
    std::string csv = report_csv_header() + "\n";
    for (const auto& r : reports) csv += report_csv_row(r) + "\n";
    write_atomically(a.csv_path, csv);
  }
  if (!series_path.empty()) write_atomically(series_path, series_csv(reports));
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Query planning over early-exit detection traces", "epplan"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic trace and print its census");
  g->add_option("--regime", gen.regime, "frequent_easy, frequent_hard, rare_hard, q1..q4 or random")->required();
  g->add_option("--frames", gen.frames, "Frame count")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--out", gen.out, "Manifest path to write")->required();

  RunArgs run;
  std::string system = "thia";
  std::string systems_text = "naive,coarse,filter,specialized,cascade,thia_single,thia_ei,thia,optimal";
  std::string series_path;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--trace", run.trace, "Trace manifest")->required();
    c->add_option("--query", run.query, "Query text or a file containing it")->required();
    c->add_option("--config", run.overrides, "key=value override (repeatable)");
    c->add_option("--seed", run.seed, "Seed for estimator training");
    c->add_option("--json", run.json_path, "JSON output path");
  };
  auto* p = app.add_subcommand("plan", "Plan a query and print the chunk assignments");
  add_common(p);
  auto* r = app.add_subcommand("run", "Run one system and write its report");
  add_common(r);
  r->add_option("--system", system, "System to run")->check(CLI::IsMember(system_names()));
  r->add_option("--csv", run.csv_path, "CSV output path");
  auto* c = app.add_subcommand("compare", "Run several systems on one trace and query");
  add_common(c);
  c->add_option("--systems", systems_text, "Comma-separated systems");
  c->add_option("--csv", run.csv_path, "CSV output path");
  c->add_option("--series", series_path, "Per-chunk execution cost CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (p->parsed()) return cmd_plan(run, out);
    if (r->parsed()) return cmd_run(run, system, out);
    return cmd_compare(run, split_list(systems_text), series_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace epplan
