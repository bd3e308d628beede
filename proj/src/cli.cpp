#include "demix/cli.hpp"

#include "demix/bandwidth.hpp"
#include "demix/binning.hpp"
#include "demix/estimator.hpp"
#include "demix/experiments.hpp"
#include "demix/io.hpp"
#include "demix/parallel.hpp"
#include "demix/simulation.hpp"
#include "demix/topic_score.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace demix::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string error_record(const std::string& kind, int exit_code, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return "error=" + kind + " exit=" + std::to_string(exit_code) + " message=\"" + escaped + "\"";
}

namespace {

// Reads CLI11 configuration from a JSON object; nested objects become
// dotted sections, arrays become repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items;
    Json root;
    try {
      root = Json::parse(input);
    } catch (const Json::exception& e) {
      throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
    }
    if (!root.is_object()) throw CLI::ConversionError("JSON config must be an object");
    collect(root, {}, items);
    return items;
  }

 private:
  static std::string scalar(const Json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    return value.dump();
  }

  static void collect(const Json& object, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (auto it = object.begin(); it != object.end(); ++it) {
      if (it->is_object()) {
        auto next = parents;
        next.push_back(it.key());
        collect(*it, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(*it));
      }
      items.push_back(std::move(item));
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void log_info(const std::string& line) { std::cerr << "info " << line << '\n'; }

KernelSpec kernel_for(int order, double h, Index dimension) {
  return order <= 1 ? KernelSpec::gaussian(h, dimension) : KernelSpec::higher_order(order, h, dimension);
}

// "auto" or a positive integer.
Index parse_bins(const std::string& text, Index topics, const GroupedSample& sample) {
  if (text == "auto") {
    const double mean_size = static_cast<double>(sample.total_points()) / static_cast<double>(sample.group_count());
    return default_bin_count(topics, mean_size, sample.group_count());
  }
  try {
    std::size_t used = 0;
    const long long value = std::stoll(text, &used);
    if (used == text.size() && value >= 1) return static_cast<Index>(value);
  } catch (const std::exception&) {
  }
  fail(ErrorKind::config, "--bins must be 'auto' or a positive integer, got '" + text + "'");
}

double parse_bandwidth(const std::string& text) {
  if (text == "auto") return 0.0;
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size() && value > 0.0 && std::isfinite(value)) return value;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::config, "--bandwidth must be 'auto' or a positive number, got '" + text + "'");
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) fail(ErrorKind::input, "missing input file: " + path);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::input, "cannot create output directory: " + dir.string());
}

// Every option of the subcommand with its effective value, defaults filled.
Json resolved_config(const CLI::App& command) {
  Json out;
  out["command"] = command.get_name();
  for (const CLI::Option* opt : command.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      out[name] = results.size() == 1 ? Json(results.front()) : Json(results);
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void echo_config(const CLI::App& command, const fs::path& path) { write_text(path, resolved_config(command).dump(2) + "\n"); }

fs::path sibling_config(const fs::path& output) {
  fs::path p = output;
  p += ".config.json";
  return p;
}

std::vector<std::string> numbered(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  for (Index k = 0; k < count; ++k) out.push_back(prefix + std::to_string(k + 1));
  return out;
}

void add_ridge_option(CLI::App& sub, std::string& ridge, const std::string& what) {
  sub.add_option("--ridge", ridge, what)->check(CLI::IsMember({"rule", "none"}));
}

Ridge ridge_from(const std::string& name) { return name == "none" ? Ridge::none : Ridge::rule; }

constexpr const char* kRequired = "Required";

Json summary_json(const Summary& s) { return Json{{"mean", s.mean}, {"standard_error", s.standard_error}}; }

// ---- commands ----

struct SimulateArgs {
  Index n = 100, N = 100, K = 3;
  double beta = 2.0, tau = 0.5;
  std::uint64_t seed = 1;
  Index cdf_knots = 100000;
  std::string output, memberships;
};

void cmd_simulate(const SimulateArgs& a, const CLI::App& command) {
  if (a.N < 2) fail(ErrorKind::config, "simulate: N must be at least 2");
  const BumpDensities densities(a.K, a.beta, a.cdf_knots);
  const Replicate rep = simulate_replicate(densities, a.n, a.N, a.tau, a.seed);
  if (fs::path(a.output).extension() == ".bin") {
    write_sample_binary(a.output, rep.sample);
  } else {
    write_sample_csv(a.output, rep.sample);
  }
  if (!a.memberships.empty()) write_matrix_csv(a.memberships, rep.memberships, numbered("pi_", a.K));
  echo_config(command, sibling_config(a.output));
}

struct TopicsArgs {
  Index K = 0;
  std::string input, data, bins = "auto", output;
  std::uint64_t seed = 0;
};

void cmd_topics(const TopicsArgs& a, const CLI::App& command) {
  Matrix topics;
  if (!a.data.empty()) {
    require_file(a.data);
    const LabeledSample labeled = read_sample(a.data);
    const BinPartition partition = build_bins(labeled.sample, parse_bins(a.bins, a.K, labeled.sample));
    topics = topic_score(histogram(labeled.sample, partition), a.K);
  } else {
    if (a.input.empty()) fail(ErrorKind::config, "topics: give --input (histogram CSV) or --data (sample CSV)");
    require_file(a.input);
    const Matrix counts = read_matrix_csv(a.input);
    if ((counts.array() < 0.0).any()) fail(ErrorKind::input, "topics: negative count in " + a.input);
    topics = topic_score(counts, counts.colwise().sum().transpose(), a.K);
  }
  write_matrix_csv(a.output, topics, numbered("topic_", a.K));
  echo_config(command, sibling_config(a.output));
}

struct BandwidthArgs {
  Index K = 0, grid = 20, subsample = 2000, quadrature = 400;
  int order = 1;
  bool refit = false;
  std::string ridge = "rule";
  std::string input, bins = "auto", output;
  std::uint64_t seed = 0;
};

void cmd_bandwidth(const BandwidthArgs& a, const CLI::App& command) {
  require_file(a.input);
  const LabeledSample labeled = read_sample(a.input);
  const GroupedSample& sample = labeled.sample;
  const BinPartition partition = build_bins(sample, parse_bins(a.bins, a.K, sample));
  const Matrix topics = topic_score(histogram(sample, partition), a.K);
  const double mean_size = static_cast<double>(sample.total_points()) / static_cast<double>(sample.group_count());
  const BandwidthGrid grid = make_default_grid(a.K, mean_size, sample.group_count(), a.grid);
  CvOptions options;
  options.subsample = a.subsample;
  options.seed = a.seed;
  options.quadrature_points = a.quadrature;
  options.refit_topics = a.refit;
  options.ridge = ridge_from(a.ridge);
  const BandwidthSelection selection =
      select_bandwidth(sample, partition, topics, grid, options, kernel_for(a.order, 1.0, sample.dimension()));

  std::string out = "t,h,amise,seconds\n";
  for (const auto& s : selection.scores) {
    out += format_double(s.exponent) + "," + format_double(s.bandwidth) + "," + format_double(s.amise) + "," +
           format_double(s.seconds) + "\n";
  }
  write_text(a.output, out);
  echo_config(command, sibling_config(a.output));
  log_info("selected_h=" + format_double(selection.bandwidth));
}

struct EstimateArgs {
  Index K = 0, grid = 20, subsample = 2000, quadrature = 400, grid_points = 0;
  int order = 1;
  std::string input, bandwidth = "auto", bins = "auto", out;
  bool weights = false;
  std::string ridge = "rule";
  std::uint64_t seed = 0;
};

void cmd_estimate(const EstimateArgs& a, const CLI::App& command) {
  require_file(a.input);
  const fs::path dir(a.out);
  ensure_directory(dir);
  Json timings;
  auto start = Clock::now();
  const LabeledSample labeled = read_sample(a.input);
  const GroupedSample& sample = labeled.sample;
  timings["read"] = seconds_since(start);

  start = Clock::now();
  const Index bins = parse_bins(a.bins, a.K, sample);
  const BinPartition partition = build_bins(sample, bins);
  const HistogramMatrix counts = histogram(sample, partition);
  timings["bins"] = seconds_since(start);

  start = Clock::now();
  const Matrix topics = topic_score(counts, a.K);
  timings["topics"] = seconds_since(start);

  start = Clock::now();
  double h = parse_bandwidth(a.bandwidth);
  const bool cross_validated = !(h > 0.0);
  if (cross_validated) {
    const double mean_size = static_cast<double>(sample.total_points()) / static_cast<double>(sample.group_count());
    CvOptions options;
    options.subsample = a.subsample;
    options.seed = a.seed;
    options.quadrature_points = a.quadrature;
    options.ridge = ridge_from(a.ridge);
    h = select_bandwidth(sample, partition, topics, make_default_grid(a.K, mean_size, sample.group_count(), a.grid),
                         options, kernel_for(a.order, 1.0, sample.dimension()))
            .bandwidth;
  }
  timings["bandwidth"] = seconds_since(start);

  start = Clock::now();
  const DemixFit fit = build_demix_estimator(sample, partition, topics, kernel_for(a.order, h, sample.dimension()), ridge_from(a.ridge));
  timings["estimator"] = seconds_since(start);

  start = Clock::now();
  const Index d = sample.dimension();
  const Index per_axis = a.grid_points > 0 ? a.grid_points : (d == 1 ? 400 : 40);
  const Matrix grid = quadrature_grid(sample, 3.0 * h, per_axis);
  const Matrix values = fit.estimate.evaluate_on_grid(grid);
  timings["grid"] = seconds_since(start);

  Matrix table(grid.rows(), d + a.K);
  table << grid, values.transpose();
  std::vector<std::string> header = d == 1 ? std::vector<std::string>{"x"} : numbered("x_", d);
  for (const auto& name : numbered("g_", a.K)) header.push_back(name);
  write_matrix_csv(dir / "grid.csv", table, header);
  write_matrix_csv(dir / "G.csv", topics, numbered("topic_", a.K));

  const Memberships pi = estimate_memberships(counts, topics);
  std::string pi_text = "group_id";
  for (const auto& name : numbered("raw_", a.K)) pi_text += "," + name;
  for (const auto& name : numbered("projected_", a.K)) pi_text += "," + name;
  pi_text += "\n";
  for (Index i = 0; i < sample.group_count(); ++i) {
    pi_text += labeled.group_ids[static_cast<std::size_t>(i)];
    for (Index k = 0; k < a.K; ++k) pi_text += "," + format_double(pi.raw(i, k));
    for (Index k = 0; k < a.K; ++k) pi_text += "," + format_double(pi.projected(i, k));
    pi_text += "\n";
  }
  write_text(dir / "pi.csv", pi_text);
  write_text(dir / "partition.json", partition_to_json(partition) + "\n");
  if (a.weights) write_weights_binary(dir / "weights.bin", fit.estimate.points(), fit.estimate.weights());

  Json meta;
  meta["n"] = sample.group_count();
  meta["P"] = sample.total_points();
  meta["d"] = d;
  meta["K"] = a.K;
  meta["M"] = bins;
  meta["h"] = h;
  meta["h_cross_validated"] = cross_validated;
  meta["ridge"] = a.ridge;
  meta["epsilon_event"] = fit.regularization.triggered;
  meta["epsilon_fired"] = fit.regularization.fired();
  meta["epsilon"] = fit.regularization.epsilon;
  meta["lambda_min"] = fit.regularization.lambda_min;
  meta["lambda_threshold"] = fit.regularization.threshold;
  meta["timings"] = timings;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  echo_config(command, dir / "config.json");
}

struct ExperimentArgs {
  ExperimentConfig config;
  std::string ridge = "none";
  std::string out;
  double fixed_h = 0.31;
  Index bin_points = 10;
};

void add_experiment_options(CLI::App& sub, ExperimentArgs& a) {
  auto& c = a.config;
  sub.add_option("--out", a.out, "Output directory")->group(kRequired);
  sub.add_option("--n", c.n, "Groups per dataset");
  sub.add_option("--N", c.N, "Points per group");
  sub.add_option("--K", c.K, "Components");
  sub.add_option("--beta", c.beta, "Bump smoothness");
  sub.add_option("--tau", c.tau, "Membership temperature");
  sub.add_option("--reps", c.reps, "Replications");
  sub.add_option("--seed", c.seed, "Master seed");
  sub.add_option("--bandwidth-grid", c.bandwidth_grid, "Bandwidth candidates L");
  sub.add_option("--eval-points", c.eval_points, "ISE grid size");
  sub.add_option("--quadrature-points", c.quadrature_points, "Criterion quadrature size");
  sub.add_option("--subsample", c.subsample, "Leave-one-out points per candidate");
  sub.add_option("--cdf-knots", c.cdf_knots, "Sampling table size");
  sub.add_option("--order", c.kernel_order, "Kernel order (1 = Gaussian)");
  add_ridge_option(sub, a.ridge, "Ridge on G'TG: rule or none");
}

ExperimentConfig experiment_config(const ExperimentArgs& a) {
  ExperimentConfig config = a.config;
  config.ridge = ridge_from(a.ridge);
  return config;
}

void cmd_exp1(const ExperimentArgs& a, const CLI::App& command) {
  const fs::path dir(a.out);
  ensure_directory(dir);
  const Experiment1Result result = run_experiment1(experiment_config(a));
  std::string csv = "setting,n,N,K,rep,k,ise,mise,h,M\n";
  Json settings = Json::array();
  for (std::size_t s = 0; s < result.settings.size(); ++s) {
    const auto& sr = result.settings[s];
    for (const auto& r : sr.replications) {
      for (Index k = 0; k < r.ise.size(); ++k) {
        csv += std::to_string(s) + "," + std::to_string(sr.setting.n) + "," + std::to_string(sr.setting.N) + "," +
               std::to_string(sr.setting.K) + "," + std::to_string(r.rep) + "," + std::to_string(k + 1) + "," +
               format_double(r.ise[k]) + "," + format_double(r.mise) + "," + format_double(r.bandwidth) + "," +
               std::to_string(r.bins) + "\n";
      }
    }
    settings.push_back({{"setting", s},
                        {"n", sr.setting.n},
                        {"N", sr.setting.N},
                        {"K", sr.setting.K},
                        {"mise", summary_json(sr.mise)}});
  }
  write_text(dir / "exp1.csv", csv);
  write_text(dir / "summary.json", Json{{"experiment", "exp1"}, {"settings", settings}}.dump(2) + "\n");
  echo_config(command, dir / "config.json");
}

void cmd_exp2(const ExperimentArgs& a, const CLI::App& command) {
  const fs::path dir(a.out);
  ensure_directory(dir);
  const Experiment2Result result = run_experiment2(experiment_config(a), a.fixed_h, a.bin_points);
  auto sweep_csv = [](const std::vector<SweepPoint>& points, const std::string& name) {
    std::string csv = "t," + name + ",rep,mise\n";
    for (const auto& p : points)
      for (std::size_t r = 0; r < p.mise.size(); ++r)
        csv += format_double(p.exponent) + "," + format_double(p.value) + "," + std::to_string(r) + "," +
               format_double(p.mise[r]) + "\n";
    return csv;
  };
  auto sweep_json = [](const std::vector<SweepPoint>& points, const std::string& name) {
    Json arr = Json::array();
    for (const auto& p : points) arr.push_back({{"t", p.exponent}, {name, p.value}, {"mise", summary_json(p.summary)}});
    return arr;
  };
  write_text(dir / "exp2_bandwidth.csv", sweep_csv(result.bandwidth_sweep, "h"));
  write_text(dir / "exp2_bins.csv", sweep_csv(result.bin_sweep, "M"));
  Json summary{{"experiment", "exp2"},
               {"bins_for_bandwidth_sweep", result.bins_for_bandwidth_sweep},
               {"bandwidth_for_bin_sweep", result.bandwidth_for_bin_sweep},
               {"bandwidth_sweep", sweep_json(result.bandwidth_sweep, "h")},
               {"bin_sweep", sweep_json(result.bin_sweep, "M")}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  echo_config(command, dir / "config.json");
}

void cmd_rate(const ExperimentArgs& a, const CLI::App& command) {
  const fs::path dir(a.out);
  ensure_directory(dir);
  std::vector<Setting> settings = rate_settings();
  for (auto& s : settings) s.K = a.config.K;
  const RateResult result = run_rate_study(experiment_config(a), settings);
  std::string csv = "n,N,Nn,h,rep,mise,oracle_mise\n";
  Json rows = Json::array();
  for (const auto& row : result.rows) {
    for (std::size_t r = 0; r < row.mise.size(); ++r)
      csv += std::to_string(row.setting.n) + "," + std::to_string(row.setting.N) + "," +
             format_double(row.sample_size) + "," + format_double(row.bandwidth) + "," + std::to_string(r) + "," +
             format_double(row.mise[r]) + "," + format_double(row.oracle_mise[r]) + "\n";
    rows.push_back({{"n", row.setting.n},
                    {"N", row.setting.N},
                    {"h", row.bandwidth},
                    {"mise", summary_json(row.summary)},
                    {"oracle_mise", summary_json(row.oracle_summary)}});
  }
  auto slope_json = [](const SlopeFit& f) {
    return Json{{"slope", f.slope}, {"standard_error", f.standard_error}, {"ci_low", f.ci_low}, {"ci_high", f.ci_high}};
  };
  Json summary{{"experiment", "rate"},
               {"rows", rows},
               {"slope", slope_json(result.slope)},
               {"oracle_slope", slope_json(result.oracle_slope)}};
  write_text(dir / "rate.csv", csv);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  echo_config(command, dir / "config.json");
}

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::input || kind == ErrorKind::config ? 2 : 3;
}

// Config file values fill options the command line left unset. Keys may sit
// at the top level or under a section named after the command.
void apply_config_file(CLI::App& command, const std::string& path) {
  if (path.empty()) return;
  require_file(path);
  std::vector<CLI::ConfigItem> items;
  try {
    if (fs::path(path).extension() == ".json") {
      items = JsonConfig().from_file(path);
    } else {
      items = CLI::ConfigTOML().from_file(path);
    }
  } catch (const CLI::Error& e) {
    fail(ErrorKind::config, "cannot parse config " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents.front() == command.get_name())) continue;
    CLI::Option* opt = command.get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") {
      fail(ErrorKind::config, "unknown key '" + item.fullname() + "' in " + path);
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      fail(ErrorKind::config, "config key '" + item.name + "': " + e.what());
    }
  }
}

void check_required(const CLI::App& command) {
  for (const CLI::Option* opt : command.get_options()) {
    if (opt->get_group() == kRequired && opt->count() == 0) {
      fail(ErrorKind::config, command.get_name() + ": " + opt->get_name() + " is required");
    }
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Topic-weighted kernel density estimation for grouped mixtures", "demix"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->envname("DEMIX_THREADS");

  std::string config_path;
  auto subcommand = [&](const std::string& name, const std::string& description) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "TOML or JSON configuration file");
    return sub;
  };

  SimulateArgs sim;
  CLI::App* simulate = subcommand("simulate", "Draw a synthetic grouped sample");
  simulate->add_option("--n", sim.n, "Groups");
  simulate->add_option("--N", sim.N, "Points per group");
  simulate->add_option("--K", sim.K, "Components");
  simulate->add_option("--beta", sim.beta, "Bump smoothness");
  simulate->add_option("--tau", sim.tau, "Membership temperature");
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--cdf-knots", sim.cdf_knots, "Sampling table size");
  simulate->add_option("--output", sim.output, "Sample file (.csv or .bin)")->group(kRequired);
  simulate->add_option("--memberships", sim.memberships, "Optional CSV of the true memberships");

  TopicsArgs top;
  CLI::App* topics = subcommand("topics", "Estimate the topic matrix with Topic-SCORE");
  topics->add_option("--k", top.K, "Components")->group(kRequired);
  topics->add_option("--input", top.input, "Histogram CSV, bins by groups");
  topics->add_option("--data", top.data, "Grouped sample instead of a histogram");
  topics->add_option("--bins", top.bins, "Bin count for --data: auto or M");
  topics->add_option("--seed", top.seed, "Seed (unused; the method is deterministic)");
  topics->add_option("--output", top.output, "Topic matrix CSV")->group(kRequired);

  BandwidthArgs bw;
  CLI::App* bandwidth = subcommand("bandwidth", "Score the bandwidth grid by leave-one-out AMISE");
  bandwidth->add_option("--input", bw.input, "Grouped sample (.csv or .bin)")->group(kRequired);
  bandwidth->add_option("--k", bw.K, "Components")->group(kRequired);
  bandwidth->add_option("--grid", bw.grid, "Number of candidates L");
  bandwidth->add_option("--subsample", bw.subsample, "Leave-one-out points (0 = all)");
  bandwidth->add_option("--quadrature", bw.quadrature, "Quadrature points");
  bandwidth->add_option("--bins", bw.bins, "auto or M");
  bandwidth->add_option("--order", bw.order, "Kernel order (1 = Gaussian)");
  add_ridge_option(*bandwidth, bw.ridge, "Ridge on G'TG: rule or none");
  bandwidth->add_flag("--refit-topics", bw.refit, "Refit topics per left-out point (slow)");
  bandwidth->add_option("--seed", bw.seed, "Subsample seed");
  bandwidth->add_option("--output", bw.output, "Scores CSV")->group(kRequired);

  EstimateArgs est;
  CLI::App* estimate = subcommand("estimate", "Run the full estimator on a grouped sample");
  estimate->add_option("--input", est.input, "Grouped sample (.csv or .bin)")->group(kRequired);
  estimate->add_option("--k", est.K, "Components")->group(kRequired);
  estimate->add_option("--bandwidth", est.bandwidth, "auto or a positive h");
  estimate->add_option("--bins", est.bins, "auto or M");
  estimate->add_option("--grid", est.grid, "Bandwidth candidates L for auto");
  estimate->add_option("--subsample", est.subsample, "Leave-one-out points for auto (0 = all)");
  estimate->add_option("--quadrature", est.quadrature, "Quadrature points for auto");
  estimate->add_option("--order", est.order, "Kernel order (1 = Gaussian)");
  estimate->add_option("--grid-points", est.grid_points, "Evaluation nodes per axis (0 = 400 in 1-d, 40 otherwise)");
  add_ridge_option(*estimate, est.ridge, "Ridge on G'TG: rule or none");
  estimate->add_flag("--weights", est.weights, "Also write weights.bin");
  estimate->add_option("--seed", est.seed, "Subsample seed");
  estimate->add_option("--out", est.out, "Output directory")->group(kRequired);

  ExperimentArgs e1, e2, rt;
  CLI::App* exp1 = subcommand("exp1", "MISE across sample sizes and K");
  add_experiment_options(*exp1, e1);
  CLI::App* exp2 = subcommand("exp2", "MISE sweeps over h and M");
  add_experiment_options(*exp2, e2);
  exp2->add_option("--fixed-h", e2.fixed_h, "Bandwidth for the M sweep");
  exp2->add_option("--bin-points", e2.bin_points, "Points in the M sweep");
  CLI::App* rate = subcommand("rate", "Log-log MISE slope at the theory bandwidth");
  add_experiment_options(*rate, rt);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    if (!app.get_subcommands().empty()) std::cout << app.get_subcommands().front()->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << error_record("config_error", 2, e.what()) << '\n';
    return 2;
  }

  try {
    if (threads < 0) fail(ErrorKind::config, "--threads must be non-negative");
    set_thread_count(static_cast<unsigned>(threads));
    CLI::App& command = *app.get_subcommands().front();
    apply_config_file(command, config_path);
    check_required(command);
    if (*simulate) cmd_simulate(sim, *simulate);
    if (*topics) cmd_topics(top, *topics);
    if (*bandwidth) cmd_bandwidth(bw, *bandwidth);
    if (*estimate) cmd_estimate(est, *estimate);
    if (*exp1) cmd_exp1(e1, *exp1);
    if (*exp2) cmd_exp2(e2, *exp2);
    if (*rate) cmd_rate(rt, *rate);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    std::cerr << error_record(to_string(e.kind()), code, e.what()) << '\n';
    return code;
  } catch (const std::exception& e) {
    std::cerr << error_record("internal_error", 1, e.what()) << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace demix::cli
