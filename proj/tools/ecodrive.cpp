#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "ecodrive/analytics.hpp"
#include "ecodrive/assessment.hpp"
#include "ecodrive/calibration.hpp"
#include "ecodrive/emissions.hpp"
#include "ecodrive/flow.hpp"
#include "ecodrive/report.hpp"
#include "ecodrive/safety.hpp"
#include "ecodrive/scenario.hpp"
#include "ecodrive/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecodrive;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit : int { kOk = 0, kUsage = 2, kData = 65, kIo = 66, kSoftware = 70, kConfig = 78 };

int exit_code(Error::Category c) {
  switch (c) {
    case Error::Category::usage: return kUsage;
    case Error::Category::io: return kIo;
    case Error::Category::data:
    case Error::Category::validation: return kData;
    case Error::Category::config: return kConfig;
    case Error::Category::fault: return kSoftware;
  }
  return kSoftware;
}

std::string_view category_name(Error::Category c) {
  switch (c) {
    case Error::Category::usage: return "usage";
    case Error::Category::io: return "io";
    case Error::Category::data: return "data";
    case Error::Category::validation: return "validation";
    case Error::Category::config: return "config";
    case Error::Category::fault: return "fault";
  }
  return "unknown";
}

struct Globals {
  fs::path out = "out";
  std::uint64_t seed = 1;
  int jobs = 0;
  std::vector<std::string> argv;
};

void write_manifest(const Globals& g, const std::string& command, json config) {
  json m{{"schema", kSchemaVersion},
         {"tool", "ecodrive"},
         {"version", kVersion},
         {"command", command},
         {"seed", g.seed},
         {"jobs", g.jobs},
         {"argv", g.argv},
         {"config", std::move(config)}};
  fs::create_directories(g.out);
  write_file_atomic(g.out / "manifest.json", m.dump(2) + "\n");
}

fs::path require_file(const fs::path& p) {
  if (!fs::exists(p)) throw IoError(fmt::format("input '{}' does not exist", p.string()));
  return p;
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  require_file(dir);
  if (!fs::is_directory(dir)) return {dir};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<scenario::ScenarioSpec> load_scenarios(const fs::path& path) {
  std::vector<scenario::ScenarioSpec> out;
  for (const auto& f : list_files(path, ".json")) {
    if (f.filename() == "manifest.json") continue;
    out.push_back(scenario::parse_spec(read_file(f)));
  }
  if (out.empty()) throw DataError(fmt::format("no scenarios under '{}'", path.string()));
  return out;
}

std::unique_ptr<EmissionProvider> load_emissions(const std::string& dir) {
  if (dir.empty()) return std::make_unique<emissions::OracleProvider>();
  auto models = std::make_shared<std::map<EmissionKey, emissions::EmissionModel>>();
  for (const auto& f : list_files(dir, ".bin")) {
    auto m = emissions::deserialize_model(read_file(f));
    models->emplace(m.key, std::move(m));
  }
  if (models->empty()) throw DataError(fmt::format("no emission models under '{}'", dir));
  std::optional<EmissionKey> fallback;
  if (models->count(kDefaultEmissionKey)) fallback = kDefaultEmissionKey;
  else fallback = models->begin()->first;
  return std::make_unique<emissions::SurrogateProvider>(std::move(models), true, fallback);
}

std::string policy_file(const fs::path& dir, const train::Partition& p, policy::Variant v) {
  return (dir / p.name() / fmt::format("{}.ckpt", policy::to_string(v))).string();
}

assess::PolicySet load_policies(const fs::path& dir, const train::Partition& p) {
  assess::PolicySet set;
  for (auto v : {policy::Variant::pi1, policy::Variant::pi2}) {
    const fs::path f = policy_file(dir, p, v);
    if (!fs::exists(f)) continue;
    (v == policy::Variant::pi1 ? set.pi1 : set.pi2) = train::load_checkpoint(f);
  }
  return set;
}

json metrics_json(const train::MetricSummary& m) {
  json runs = json::array();
  for (const auto& r : m.runs)
    runs.push_back({{"emissions_g", r.emissions_g},
                    {"throughput", r.throughput},
                    {"queue_ratio", r.queue_ratio},
                    {"waiting_time_s", r.waiting_time_s},
                    {"guard_interventions", r.guard_interventions},
                    {"collisions", r.collisions}});
  return json{{"emissions_g", m.emissions_g},   {"throughput", m.throughput},
              {"queue_ratio", m.queue_ratio},   {"waiting_time_s", m.waiting_time_s},
              {"control_wait_s", m.control_wait_s}, {"runs", runs}};
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string grid;
  int count = 10;
  bool enumerate = false;
};

void run_gen(const Globals& g, const GenArgs& a) {
  const auto grid = scenario::parse_grid(json::parse(read_file(require_file(a.grid))));
  const auto specs = a.enumerate ? scenario::enumerate_grid(grid, g.seed) : scenario::sample_scenarios(grid, a.count, g.seed);
  fs::create_directories(g.out / "scenarios");
  for (const auto& s : specs) write_file_atomic(g.out / "scenarios" / (s.id + ".json"), scenario::serialize(s));
  write_manifest(g, "gen", {{"grid", a.grid}, {"count", specs.size()}, {"enumerate", a.enumerate}});
  fmt::print("wrote {} scenarios to {}\n", specs.size(), (g.out / "scenarios").string());
}

struct ImputeArgs {
  std::string graph;
};

void run_impute(const Globals& g, const ImputeArgs& a) {
  const auto graph = scenario::parse_road_graph(read_file(require_file(a.graph)));
  const auto r = scenario::impute_flows(graph);
  fs::create_directories(g.out);
  write_file_atomic(g.out / "flows.txt", scenario::format_flows(graph, r.flow));
  json summary{{"schema", kSchemaVersion},
               {"objective", r.objective},
               {"conservation_residual", r.conservation_residual},
               {"kkt_residual", r.kkt_residual},
               {"consistent", r.consistent},
               {"iterations", r.iterations}};
  write_file_atomic(g.out / "impute.json", summary.dump(2) + "\n");
  write_manifest(g, "impute", {{"graph", a.graph}});
  fmt::print("imputed {} edges, conservation residual {:.3g}\n", r.flow.size(), r.conservation_residual);
}

struct CalibrateArgs {
  std::string trajectories;
  std::string cls = "car";
  int synthetic = 0;
  double noise = 0.1;
  int steps = 400;
};

void run_calibrate(const Globals& g, const CalibrateArgs& a) {
  const auto cls = a.cls == "heavy" ? calib::DriverClass::heavy
                   : a.cls == "car" ? calib::DriverClass::car
                                    : throw UsageError(fmt::format("unknown driver class '{}'", a.cls));
  std::vector<calib::DriverTrajectory> trajs;
  if (a.synthetic > 0) {
    const auto pop = calib::default_population(cls);
    for (int i = 0; i < a.synthetic; ++i) {
      const auto theta = calib::sample_driver(pop, hash_combine(g.seed, static_cast<std::uint64_t>(i)));
      trajs.push_back(calib::synthesize_trajectory(fmt::format("d{:04d}", i), theta, a.steps, a.noise,
                                                   hash_combine(g.seed, static_cast<std::uint64_t>(i), 7)));
    }
  } else {
    if (a.trajectories.empty()) throw UsageError("--trajectories or --synthetic is required");
    trajs = calib::parse_trajectories_csv(read_file(require_file(a.trajectories)));
  }
  calib::CalibrationOptions opt;
  opt.seed = g.seed;
  const auto res = calib::calibrate(trajs, calib::default_prior(cls), cls, opt);
  fs::create_directories(g.out);
  write_file_atomic(g.out / "population.json", calib::to_text(res.population));
  std::string fits = "driver,v0,s0,T,alpha,beta,sigma_eps,log_posterior\n";
  for (const auto& f : res.fits)
    fits += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", f.driver, f.theta.v0, f.theta.s0,
                        f.theta.T, f.theta.alpha, f.theta.beta, f.sigma_eps, f.log_posterior);
  write_file_atomic(g.out / "fits.csv", fits);
  write_manifest(g, "calibrate", {{"trajectories", a.trajectories}, {"class", a.cls}, {"synthetic", a.synthetic},
                                  {"noise", a.noise}, {"steps", a.steps}, {"skipped", res.skipped}});
  fmt::print("calibrated {} drivers ({} skipped)\n", res.fits.size(), res.skipped.size());
}

struct FitArgs {
  std::vector<std::string> keys;  ///< type/fuel/age; empty = every key
  int epochs = 400;
  int hidden = 32;
  std::string dataset;
};

EmissionKey parse_key(const std::string& s) {
  const auto a = s.find('/'), b = s.rfind('/');
  if (a == std::string::npos || a == b) throw UsageError(fmt::format("emission key '{}' must be type/fuel/age", s));
  EmissionKey k;
  k.type = parse_vehicle_type(s.substr(0, a));
  k.fuel = parse_fuel(s.substr(a + 1, b - a - 1));
  try {
    k.age_bucket = std::stoi(s.substr(b + 1));
  } catch (const std::exception&) {
    throw UsageError(fmt::format("emission key '{}' has a bad age bucket", s));
  }
  return k;
}

void run_fit(const Globals& g, const FitArgs& a) {
  std::vector<EmissionKey> keys;
  for (const auto& s : a.keys) keys.push_back(parse_key(s));
  if (keys.empty()) keys = emissions::all_emission_keys();
  std::vector<emissions::Sample> data;
  if (!a.dataset.empty()) data = emissions::dataset_from_csv(read_file(require_file(a.dataset)));
  else data = emissions::build_dataset(keys, emissions::grid_pairs(emissions::default_query_grid()));
  emissions::SurrogateOptions opt;
  opt.epochs = a.epochs;
  opt.hidden = a.hidden;
  opt.seed = g.seed;
  fs::create_directories(g.out / "models");
  std::string table = "key,samples,train_r2,holdout_r2,holdout_mae\n";
  int failed = 0;
  for (const auto& k : keys) {
    emissions::FitReport rep;
    try {
      const auto m = emissions::train_surrogate(data, k, opt, &rep);
      auto name = to_string(k);
      std::replace(name.begin(), name.end(), '/', '-');
      write_file_atomic(g.out / "models" / (name + ".bin"), emissions::serialize_model(m));
    } catch (const emissions::FitFailure& e) {
      rep = e.report;
      ++failed;
      fmt::print(stderr, "{}\n", e.what());
    }
    table += fmt::format("{},{},{:.6f},{:.6f},{:.6g}\n", to_string(k), rep.samples, rep.train_r2, rep.holdout_r2,
                         rep.holdout_mae);
  }
  write_file_atomic(g.out / "fit_report.csv", table);
  write_manifest(g, "fit-emissions", {{"keys", a.keys}, {"epochs", a.epochs}, {"hidden", a.hidden}, {"dataset", a.dataset}});
  if (failed) throw DataError(fmt::format("{} of {} emission models missed the R^2 threshold", failed, keys.size()));
  fmt::print("fitted {} emission models\n", keys.size());
}

struct TrainArgs {
  std::string partition;
  std::string scenario;
  std::string variant = "pi1";
  std::string grid = "reduced";
  std::string emissions;
  std::string warm_start;
  int epochs = -1;
  int episodes = -1;
  int horizon = -1;
  double lr = -1.0;
  double clip = -1.0;
  std::optional<double> init_log_std;
  bool paper_scale = false;
};

void run_train(const Globals& g, const TrainArgs& a) {
  auto cfg = a.paper_scale ? train::TrainConfig::paper_scale() : train::TrainConfig{};
  if (a.epochs >= 0) cfg.epochs = a.epochs;
  if (a.episodes > 0) cfg.episodes_per_epoch = a.episodes;
  if (a.horizon > 0) cfg.horizon = a.horizon;
  if (a.lr >= 0) cfg.lr = a.lr;
  if (a.clip > 0) cfg.clip = a.clip;
  if (a.init_log_std) cfg.init_log_std = *a.init_log_std;
  cfg.seed = g.seed;
  const auto variant = policy::parse_variant(a.variant);
  std::vector<scenario::ScenarioSpec> envs;
  train::Partition part;
  if (!a.scenario.empty()) {
    envs.push_back(scenario::parse_spec(read_file(require_file(a.scenario))));
    part = train::partition_of(envs.front());
  } else {
    if (a.partition.empty()) throw UsageError("--partition or --scenario is required");
    part = train::parse_partition(a.partition);
    train::EnvGrid grid;
    if (a.grid == "reduced") grid = grid.reduced();
    else if (a.grid != "full") throw UsageError("--grid must be full or reduced");
    envs = train::make_training_envs(part, grid, g.seed);
  }
  std::optional<train::PolicyCheckpoint> warm;
  if (!a.warm_start.empty()) warm = train::load_checkpoint(require_file(a.warm_start));
  const auto em = load_emissions(a.emissions);
  const fs::path dir = g.out / "policies" / part.name();
  fs::create_directories(dir);
  std::string log = train::epoch_stats_header();
  auto on_epoch = [&](const train::EpochStats& s) {
    log += train::to_csv_row(s);
    if (s.epoch % 10 == 0)
      fmt::print("epoch {:4d} return {:9.3f} co2 {:9.1f} g throughput {:6.1f} kl {:.4f}\n", s.epoch, s.mean_return,
                 s.emissions_g, s.throughput, s.kl);
    std::fflush(stdout);
  };
  const std::string stats_name = fmt::format("{}_epochs.csv", policy::to_string(variant));
  try {
    const auto ckpt = train::ppo_train(envs, part, variant, cfg, sim::SimConfig{}, *em, on_epoch, warm);
    train::save_checkpoint(dir / fmt::format("{}.ckpt", policy::to_string(variant)), ckpt);
  } catch (const train::TrainingDiverged&) {
    write_file_atomic(dir / stats_name, log);
    throw;
  }
  write_file_atomic(dir / stats_name, log);
  write_manifest(g, "train",
                 {{"partition", part.name()}, {"scenario", a.scenario}, {"variant", a.variant}, {"grid", a.grid},
                  {"environments", envs.size()}, {"epochs", cfg.epochs}, {"episodes", cfg.episodes_per_epoch},
                  {"horizon", cfg.horizon}, {"width", cfg.width}, {"layers", cfg.layers}, {"lr", cfg.lr},
                  {"clip", cfg.clip}, {"init_log_std", cfg.init_log_std}, {"paper_scale", a.paper_scale}, {"emissions", a.emissions},
                  {"warm_start", a.warm_start}});
  fmt::print("saved {}\n", (dir / fmt::format("{}.ckpt", policy::to_string(variant))).string());
}

struct EvalArgs {
  std::string checkpoint;
  std::string scenario;
  std::string emissions;
  std::vector<std::uint64_t> seeds = train::kEvaluationSeeds;
  int horizon = 1200;
  bool log = false;
};

void run_evaluate(const Globals& g, const EvalArgs& a) {
  const auto spec = scenario::parse_spec(read_file(require_file(a.scenario)));
  std::optional<train::PolicyCheckpoint> ckpt;
  if (!a.checkpoint.empty()) ckpt = train::load_checkpoint(require_file(a.checkpoint));
  const auto em = load_emissions(a.emissions);
  sim::SimConfig sc;
  const auto base = train::evaluate_policy(nullptr, spec, a.seeds, a.horizon, sc, *em);
  json out{{"schema", kSchemaVersion}, {"scenario", spec.id}, {"baseline", metrics_json(base)}};
  if (ckpt) {
    const auto pol = train::evaluate_policy(&*ckpt, spec, a.seeds, a.horizon, sc, *em);
    out["policy"] = metrics_json(pol);
    out["reduction"] = base.emissions_g > 0 ? 1.0 - pol.emissions_g / base.emissions_g : 0.0;
    fmt::print("baseline {:.1f} g, policy {:.1f} g ({:+.2f}%), throughput {:.1f} vs {:.1f}\n", base.emissions_g,
               pol.emissions_g, -100.0 * out["reduction"].get<double>(), pol.throughput, base.throughput);
    if (a.log) {
      policy::PolicyController ctl(std::make_shared<const nn::Mlp>(ckpt->actor), ckpt->obs);
      auto logged = sc;
      logged.log_trajectories = true;
      const auto r = sim::run_episode(spec, ctl, a.horizon, logged, *em, a.seeds.front());
      fs::create_directories(g.out);
      write_file_atomic(g.out / "trajectories.csv", r.log.to_csv());
    }
  } else {
    fmt::print("baseline {:.1f} g, throughput {:.1f}\n", base.emissions_g, base.throughput);
  }
  fs::create_directories(g.out);
  write_file_atomic(g.out / "evaluation.json", out.dump(2) + "\n");
  write_manifest(g, "evaluate", {{"checkpoint", a.checkpoint}, {"scenario", a.scenario}, {"seeds", a.seeds},
                                 {"horizon", a.horizon}, {"emissions", a.emissions}});
}

struct AssessArgs {
  std::string scenarios;
  std::string policies;
  std::string emissions;
  std::string inflow_scale = "auto";
  double tau_q = assess::kDefaultTauQ;
  int horizon = 1200;
  std::vector<std::uint64_t> seeds = train::kEvaluationSeeds;
};

void run_assess(const Globals& g, const AssessArgs& a) {
  const auto specs = load_scenarios(a.scenarios);
  const auto em = load_emissions(a.emissions);
  assess::AssessConfig cfg;
  cfg.seeds = a.seeds;
  cfg.horizon = a.horizon;
  cfg.tau_q = a.tau_q;
  if (a.inflow_scale == "auto") {
    cfg.inflow_scale = assess::bisect_inflow_scale(
        [&](double r) { return assess::baseline_queue_pass_fraction(specs, r, cfg, *em); }, 0.99, 0.0, 1.0, 6);
  } else {
    try {
      cfg.inflow_scale = std::stod(a.inflow_scale);
    } catch (const std::exception&) {
      throw UsageError("--inflow-scale must be 'auto' or a number");
    }
  }
  std::map<int, assess::PolicySet> policies;
  std::vector<assess::AssessmentRecord> records(specs.size());
  for (const auto& s : specs) {
    const auto p = train::partition_of(s);
    if (!policies.count(p.id()))
      policies[p.id()] = a.policies.empty() ? assess::PolicySet{} : load_policies(a.policies, p);
  }
  std::vector<std::string> errors(specs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      auto local = cfg;
      records[i] = assess::assess_scenario(specs[i], policies.at(train::partition_of(specs[i]).id()), local, *em);
    } catch (const std::exception& e) {
      errors[i] = fmt::format("{}: {}", specs[i].id, e.what());
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw SimulationFault(e);
  const fs::path path = g.out / "records" / "records.ndjson";
  if (fs::exists(path)) fs::remove(path);
  assess::append_records(path, records);
  write_manifest(g, "assess", {{"scenarios", a.scenarios}, {"policies", a.policies}, {"emissions", a.emissions},
                               {"inflow_scale", cfg.inflow_scale}, {"tau_q", a.tau_q}, {"horizon", a.horizon},
                               {"seeds", a.seeds}});
  const auto rep = assess::regional_effectiveness(records);
  fmt::print("assessed {} scenarios, r = {:.3f}, E = {:.4f}\n", records.size(), cfg.inflow_scale, rep.effectiveness);
}

struct SafetyArgs {
  std::string scenarios;
  std::string policies;
  std::string emissions;
  int sample = 100;
  int horizon = 1200;
  std::uint64_t run_seed = 101;
};

void run_safety(const Globals& g, const SafetyArgs& a) {
  auto specs = load_scenarios(a.scenarios);
  Rng rng = make_rng(g.seed, stream::sampling);
  std::shuffle(specs.begin(), specs.end(), rng);
  if (static_cast<int>(specs.size()) > a.sample) specs.resize(static_cast<std::size_t>(a.sample));
  const auto em = load_emissions(a.emissions);
  sim::SimConfig sc;
  sc.log_trajectories = true;
  std::vector<safety::ConflictEvent> base_events;
  std::map<std::string, std::vector<safety::ConflictEvent>> pol_events;
  std::string events_csv = "scenario,policy," + safety::events_to_csv({});
  auto collect = [&](const std::string& id, const std::string& label, const std::vector<safety::ConflictEvent>& ev) {
    const auto csv = safety::events_to_csv(ev);
    std::size_t start = csv.find('\n') + 1;
    while (start < csv.size()) {
      const auto end = csv.find('\n', start);
      events_csv += fmt::format("{},{},{}\n", id, label, csv.substr(start, end - start));
      start = end + 1;
    }
  };
  for (const auto& s : specs) {
    const auto base = sim::run_episode(s, sim::BaselineController{}, a.horizon, sc, *em, a.run_seed);
    const auto be = safety::detect_conflicts(base.log);
    base_events.insert(base_events.end(), be.begin(), be.end());
    collect(s.id, assess::kBaselineId, be);
    if (a.policies.empty()) continue;
    const auto set = load_policies(a.policies, train::partition_of(s));
    for (const auto* ck : {set.pi1 ? &*set.pi1 : nullptr, set.pi2 ? &*set.pi2 : nullptr}) {
      if (!ck) continue;
      policy::PolicyController ctl(std::make_shared<const nn::Mlp>(ck->actor), ck->obs);
      const auto r = sim::run_episode(s, ctl, a.horizon, sc, *em, a.run_seed);
      const auto ev = safety::detect_conflicts(r.log);
      const std::string label(policy::to_string(ck->variant));
      auto& acc = pol_events[label];
      acc.insert(acc.end(), ev.begin(), ev.end());
      collect(s.id, label, ev);
    }
  }
  std::vector<std::pair<std::string, safety::NormalizedReport>> rows;
  rows.emplace_back(assess::kBaselineId, safety::normalized_report(base_events, base_events));
  for (const auto& [label, ev] : pol_events) rows.emplace_back(label, safety::normalized_report(ev, base_events));
  fs::create_directories(g.out);
  write_file_atomic(g.out / "conflicts.csv", events_csv);
  write_file_atomic(g.out / "safety_report.csv", safety::report_to_csv(rows));
  write_manifest(g, "safety", {{"scenarios", a.scenarios}, {"policies", a.policies}, {"sample", a.sample},
                               {"horizon", a.horizon}, {"run_seed", a.run_seed}, {"evaluated", specs.size()}});
  fmt::print("analysed {} scenarios, {} baseline conflicts\n", specs.size(), base_events.size());
}

struct ReportArgs {
  std::string records;
};

void run_report(const Globals& g, const ReportArgs& a) {
  const auto records = assess::read_records(require_file(a.records));
  if (records.empty()) throw DataError("no records");
  const auto files = report::write_report(records, g.out);
  write_manifest(g, "report", {{"records", a.records}, {"files", files.written.size()}});
  fmt::print("wrote {} report files to {}\n", files.written.size(), g.out.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eco-driving impact assessment at signalized intersections"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  Globals g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);
  std::string out = "out";
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Global seed (ECODRIVE_SEED overrides)")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Parallel engines (0 = all cores)")->check(CLI::NonNegativeNumber);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate scenarios from a factor grid");
  c_gen->add_option("--grid", gen.grid, "Factor grid JSON")->required();
  c_gen->add_option("--count", gen.count, "Scenarios to sample")->check(CLI::PositiveNumber);
  c_gen->add_flag("--enumerate", gen.enumerate, "Write the full grid product");

  ImputeArgs imp;
  auto* c_imp = app.add_subcommand("impute", "Impute edge flows on a road graph");
  c_imp->add_option("--graph", imp.graph, "Edge list: src dst [flow]")->required();

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Fit IDM driver populations");
  c_cal->add_option("--trajectories", cal.trajectories, "CSV driver,t,s,v,dv");
  c_cal->add_option("--class", cal.cls, "car or heavy")->capture_default_str();
  c_cal->add_option("--synthetic", cal.synthetic, "Generate and recover this many drivers");
  c_cal->add_option("--noise", cal.noise, "Speed noise std for synthetic drivers")->capture_default_str();
  c_cal->add_option("--steps", cal.steps, "Steps per synthetic driver")->capture_default_str();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit-emissions", "Train emission surrogates");
  c_fit->add_option("--key", fit.keys, "type/fuel/age, repeatable (default: all)");
  c_fit->add_option("--epochs", fit.epochs)->capture_default_str();
  c_fit->add_option("--hidden", fit.hidden)->capture_default_str();
  c_fit->add_option("--dataset", fit.dataset, "Labelled CSV instead of the built-in grid");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train an eco-driving policy with PPO");
  c_tr->add_option("--partition", tr.partition, "e.g. p100-b0");
  c_tr->add_option("--scenario", tr.scenario, "Train on one scenario file instead of a partition grid");
  c_tr->add_option("--variant", tr.variant, "pi1 or pi2")->capture_default_str();
  c_tr->add_option("--grid", tr.grid, "full or reduced")->capture_default_str();
  c_tr->add_option("--emissions", tr.emissions, "Surrogate model directory (default: oracle)");
  c_tr->add_option("--warm-start", tr.warm_start, "Checkpoint to continue from");
  c_tr->add_option("--epochs", tr.epochs);
  c_tr->add_option("--episodes", tr.episodes, "Episodes per epoch");
  c_tr->add_option("--horizon", tr.horizon, "Steps per episode after warmup");
  c_tr->add_option("--lr", tr.lr, "Adam learning rate");
  c_tr->add_option("--clip", tr.clip, "PPO ratio clip");
  c_tr->add_option("--init-log-std", tr.init_log_std, "Initial log std of the action noise");
  c_tr->add_flag("--paper-scale", tr.paper_scale, "Full-size networks and schedule");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Evaluate a policy against the baseline");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Policy checkpoint (omit for baseline only)");
  c_ev->add_option("--scenario", ev.scenario)->required();
  c_ev->add_option("--emissions", ev.emissions);
  c_ev->add_option("--seeds", ev.seeds)->capture_default_str();
  c_ev->add_option("--horizon", ev.horizon)->capture_default_str();
  c_ev->add_flag("--log", ev.log, "Write the policy trajectory log for the first seed");

  AssessArgs as;
  auto* c_as = app.add_subcommand("assess", "Zero-shot assessment over scenarios");
  c_as->add_option("--scenarios", as.scenarios)->required();
  c_as->add_option("--policies", as.policies, "Directory of <partition>/<variant>.ckpt");
  c_as->add_option("--emissions", as.emissions);
  c_as->add_option("--inflow-scale", as.inflow_scale, "r for the queue check, or 'auto'")->capture_default_str();
  c_as->add_option("--tau-q", as.tau_q)->capture_default_str();
  c_as->add_option("--horizon", as.horizon)->capture_default_str();
  c_as->add_option("--seeds", as.seeds)->capture_default_str();

  SafetyArgs sa;
  auto* c_sa = app.add_subcommand("safety", "Surrogate safety measures against the baseline");
  c_sa->add_option("--scenarios", sa.scenarios)->required();
  c_sa->add_option("--policies", sa.policies);
  c_sa->add_option("--emissions", sa.emissions);
  c_sa->add_option("--sample", sa.sample, "Scenarios to sample")->capture_default_str();
  c_sa->add_option("--horizon", sa.horizon)->capture_default_str();

  ReportArgs rp;
  auto* c_rp = app.add_subcommand("report", "CSV tables and SVG plots from assessment records");
  c_rp->add_option("--records", rp.records)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    g.out = out;
    g.seed = seed_from_env(g.seed);
    if (g.jobs > 0) omp_set_num_threads(g.jobs);
    g.jobs = omp_get_max_threads();
    if (*c_gen) run_gen(g, gen);
    else if (*c_imp) run_impute(g, imp);
    else if (*c_cal) run_calibrate(g, cal);
    else if (*c_fit) run_fit(g, fit);
    else if (*c_tr) run_train(g, tr);
    else if (*c_ev) run_evaluate(g, ev);
    else if (*c_as) run_assess(g, as);
    else if (*c_sa) run_safety(g, sa);
    else if (*c_rp) run_report(g, rp);
  } catch (const Error& e) {
    std::cerr << json{{"error", category_name(e.category())}, {"message", e.what()}}.dump() << "\n";
    return exit_code(e.category());
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "data"}, {"message", e.what()}}.dump() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return kSoftware;
  }
  return kOk;
}
