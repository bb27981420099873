#include "epplan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace epplan {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError("option " + std::string(key) + ": cannot parse '" + std::string(text) + "'");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("option " + std::string(key) + ": expected true/false, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Option {
  std::function<void(SystemOptions&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const SystemOptions&)> get;
};

template <typename T>
Option number(T SystemOptions::*field) {
  return {[field](SystemOptions& o, std::string_view k, std::string_view v) { o.*field = parse_number<T>(k, v); },
          [field](const SystemOptions& o) {
            if constexpr (std::is_floating_point_v<T>) return format_double(o.*field);
            else return std::to_string(o.*field);
          }};
}

template <typename T>
Option planner_number(T PlannerConfig::*field) {
  return {[field](SystemOptions& o, std::string_view k, std::string_view v) {
            o.planner.*field = parse_number<T>(k, v);
          },
          [field](const SystemOptions& o) {
            if constexpr (std::is_floating_point_v<T>) return format_double(o.planner.*field);
            else return std::to_string(o.planner.*field);
          }};
}

template <typename T>
Option train_number(T TrainOptions::*field) {
  return {[field](SystemOptions& o, std::string_view k, std::string_view v) { o.train.*field = parse_number<T>(k, v); },
          [field](const SystemOptions& o) {
            if constexpr (std::is_floating_point_v<T>) return format_double(o.train.*field);
            else return std::to_string(o.train.*field);
          }};
}

const std::map<std::string, Option, std::less<>>& options_table() {
  static const std::map<std::string, Option, std::less<>> table{
      {"precision_min", planner_number(&PlannerConfig::precision_min)},
      {"recall_min", planner_number(&PlannerConfig::recall_min)},
      {"min_chunk", planner_number(&PlannerConfig::min_chunk)},
      {"max_final_rate", planner_number(&PlannerConfig::max_final_rate)},
      {"posi_sufficient", planner_number(&PlannerConfig::posi_sufficient)},
      {"branching", planner_number(&PlannerConfig::branching)},
      {"reuse_radius", planner_number(&PlannerConfig::reuse_radius)},
      {"reuse_divisor", planner_number(&PlannerConfig::reuse_divisor)},
      {"estimator_cost", planner_number(&PlannerConfig::estimator_cost)},
      {"selection_mode",
       {[](SystemOptions& o, std::string_view k, std::string_view v) {
          if (v == "evaluate") o.planner.selection_mode = SelectionMode::evaluate;
          else if (v == "estimate") o.planner.selection_mode = SelectionMode::estimate;
          else throw ConfigError("option " + std::string(k) + ": expected evaluate or estimate");
        },
        [](const SystemOptions& o) {
          return std::string(o.planner.selection_mode == SelectionMode::evaluate ? "evaluate" : "estimate");
        }}},
      {"allowed_depths",
       {[](SystemOptions& o, std::string_view k, std::string_view v) {
          std::vector<Depth> depths;
          while (!v.empty()) {
            const auto comma = v.find(',');
            depths.push_back(parse_number<Depth>(k, trim(v.substr(0, comma))));
            if (comma == std::string_view::npos) break;
            v.remove_prefix(comma + 1);
          }
          o.planner.allowed_depths = std::move(depths);
        },
        [](const SystemOptions& o) {
          std::string out;
          for (Depth d : o.planner.allowed_depths) out += (out.empty() ? "" : ",") + std::to_string(d);
          return out;
        }}},
      {"coarse.sample_frac", number(&SystemOptions::coarse_sample_frac)},
      {"filter.pass_threshold", number(&SystemOptions::filter_pass_threshold)},
      {"specialized.holdout_frac", number(&SystemOptions::specialized_holdout_frac)},
      {"specialized.f1_floor", number(&SystemOptions::specialized_f1_floor)},
      {"cascade.threshold", number(&SystemOptions::cascade_threshold)},
      {"cascade.switch_cost", number(&SystemOptions::cascade_switch_cost)},
      {"cascade.aggregate",
       {[](SystemOptions& o, std::string_view k, std::string_view v) {
          if (v == "min") o.cascade_aggregate = CascadeAggregate::min;
          else if (v == "mean") o.cascade_aggregate = CascadeAggregate::mean;
          else throw ConfigError("option " + std::string(k) + ": expected min or mean");
        },
        [](const SystemOptions& o) {
          return std::string(o.cascade_aggregate == CascadeAggregate::min ? "min" : "mean");
        }}},
      {"optimal.allow_skip",
       {[](SystemOptions& o, std::string_view k, std::string_view v) { o.optimal_allow_skip = parse_bool(k, v); },
        [](const SystemOptions& o) { return std::string(o.optimal_allow_skip ? "true" : "false"); }}},
      {"estimator.train_size", number(&SystemOptions::train_size)},
      {"estimator.epochs", train_number(&TrainOptions::epochs)},
      {"estimator.learning_rate", train_number(&TrainOptions::learning_rate)},
      {"estimator.hidden_width", train_number(&TrainOptions::hidden_width)},
      {"estimator.init_seed", train_number(&TrainOptions::init_seed)},
      {"seed", number(&SystemOptions::seed)},
  };
  return table;
}

}  // namespace

void apply_option(SystemOptions& options, std::string_view key, std::string_view value) {
  const auto& table = options_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown option '" + std::string(key) + "'");
  it->second.set(options, key, trim(value));
}

void apply_assignment(SystemOptions& options, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  apply_option(options, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void apply_config_file(SystemOptions& options, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    try {
      apply_assignment(options, body);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> effective_config(const SystemOptions& options) {
  std::map<std::string, std::string> out;
  for (const auto& [key, opt] : options_table()) out[key] = opt.get(options);
  return out;
}

}  // namespace epplan
