#include "ecodrive/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/core.h>
#include <json.hpp>

namespace ecodrive::assess {

using nlohmann::json;

Metrics to_metrics(const train::MetricSummary& s) {
  return Metrics{s.emissions_g, s.throughput, s.queue_ratio, s.waiting_time_s};
}

ConstraintFlags check_constraints(const Metrics& candidate, const Metrics& baseline,
                                  std::optional<double> scaled_queue_ratio, double tau_q) {
  if (!scaled_queue_ratio)
    throw IncompleteEvidence("queue constraint needs a run with scaled inflow; none was supplied");
  ConstraintFlags f;
  f.throughput = candidate.throughput >= baseline.throughput;
  f.queue = *scaled_queue_ratio <= tau_q;
  f.wait = candidate.preceding_wait_s <= baseline.preceding_wait_s;
  return f;
}

std::size_t select_policy(std::vector<Candidate>& candidates, double tau_q) {
  const auto base = std::find_if(candidates.begin(), candidates.end(),
                                 [](const Candidate& c) { return c.policy == kBaselineId; });
  if (base == candidates.end()) throw UsageError("the baseline must be among the candidates");
  const Metrics baseline = base->metrics;
  std::size_t best = static_cast<std::size_t>(base - candidates.begin());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    if (c.policy == kBaselineId) {
      c.flags = c.scaled_queue_ratio ? check_constraints(c.metrics, baseline, c.scaled_queue_ratio, tau_q)
                                     : ConstraintFlags{true, true, true};
      c.valid = true;
      continue;
    }
    c.flags = check_constraints(c.metrics, baseline, c.scaled_queue_ratio, tau_q);
    c.valid = c.flags.all();
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.valid && c.metrics.emissions_g < candidates[best].metrics.emissions_g) best = i;
  }
  return best;
}

Factors factors_of(const scenario::ScenarioSpec& spec) {
  const auto& a = spec.geometry.incoming.at(0);
  int lanes = 0;
  for (const auto& in : spec.geometry.incoming) lanes = std::max(lanes, in.lane_count);
  double inflow = 0.0;
  for (double q : spec.inflows) inflow += q / static_cast<double>(spec.inflows.size());
  const auto& plan = spec.control_signal;
  const auto& ph = plan.phases.at(0);
  const double ratio = (ph.green_s + ph.yellow_s) / plan.cycle_length();
  return Factors{spec.temperature, spec.humidity, a.speed_limit,
                 a.road_grade,     ratio,         inflow,
                 static_cast<double>(spec.geometry.phase_count), static_cast<double>(lanes), a.lane_length};
}

const Candidate& AssessmentRecord::selected_candidate() const {
  for (const auto& c : candidates)
    if (c.policy == selected) return c;
  throw DataError(fmt::format("record '{}' selects '{}' which is not among its candidates", scenario_id, selected));
}

// ---------------------------------------------------------------------------
// Record store

namespace {

json metrics_json(const Metrics& m) {
  return json{{"emissions_g", m.emissions_g},
              {"throughput", m.throughput},
              {"queue_ratio", m.queue_ratio},
              {"preceding_wait_s", m.preceding_wait_s}};
}

Metrics metrics_from(const json& j) {
  return Metrics{j.at("emissions_g").get<double>(), j.at("throughput").get<double>(),
                 j.at("queue_ratio").get<double>(), j.at("preceding_wait_s").get<double>()};
}

std::string intersection_key(const scenario::ScenarioSpec& spec) {
  const auto j = scenario::to_json(spec);
  const auto text = j.at("geometry").dump() + j.at("control_signal").dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a, stable across builds
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  return fmt::format("i{:016x}", h);
}

}  // namespace

std::string to_json_line(const AssessmentRecord& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    json jc{{"policy", c.policy},
            {"metrics", metrics_json(c.metrics)},
            {"flags", {{"throughput", c.flags.throughput}, {"queue", c.flags.queue}, {"wait", c.flags.wait}}},
            {"valid", c.valid}};
    jc["scaled_queue_ratio"] = c.scaled_queue_ratio ? json(*c.scaled_queue_ratio) : json(nullptr);
    cands.push_back(std::move(jc));
  }
  json j{{"schema", kSchemaVersion},
         {"scenario", r.scenario_id},
         {"intersection", r.intersection},
         {"penetration", r.penetration},
         {"season", r.season},
         {"weather", r.weather},
         {"hour_type", r.hour_type},
         {"factors", r.factors},
         {"inflow_scale", r.inflow_scale},
         {"tau_q", r.tau_q},
         {"candidates", cands},
         {"selected", r.selected},
         {"baseline", metrics_json(r.baseline)}};
  return j.dump();
}

AssessmentRecord record_from_json_line(const std::string& line) {
  try {
    const auto j = json::parse(line);
    if (!j.contains("schema") || j.at("schema").get<int>() != kSchemaVersion)
      throw DataError("assessment record has an unknown schema version");
    AssessmentRecord r;
    r.scenario_id = j.at("scenario").get<std::string>();
    r.intersection = j.at("intersection").get<std::string>();
    r.penetration = j.at("penetration").get<double>();
    r.season = j.at("season").get<std::string>();
    r.weather = j.at("weather").get<std::string>();
    r.hour_type = j.at("hour_type").get<std::string>();
    r.factors = j.at("factors").get<Factors>();
    r.inflow_scale = j.at("inflow_scale").get<double>();
    r.tau_q = j.at("tau_q").get<double>();
    for (const auto& jc : j.at("candidates")) {
      Candidate c;
      c.policy = jc.at("policy").get<std::string>();
      c.metrics = metrics_from(jc.at("metrics"));
      const auto& f = jc.at("flags");
      c.flags = ConstraintFlags{f.at("throughput").get<bool>(), f.at("queue").get<bool>(), f.at("wait").get<bool>()};
      c.valid = jc.at("valid").get<bool>();
      if (!jc.at("scaled_queue_ratio").is_null()) c.scaled_queue_ratio = jc.at("scaled_queue_ratio").get<double>();
      r.candidates.push_back(std::move(c));
    }
    r.selected = j.at("selected").get<std::string>();
    r.baseline = metrics_from(j.at("baseline"));
    (void)r.selected_candidate();
    return r;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed assessment record: {}", e.what()));
  }
}

void append_records(const std::filesystem::path& path, const std::vector<AssessmentRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for appending", path.string()));
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

std::vector<AssessmentRecord> read_records(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::exists(path)) {
    files.push_back(path);
  } else {
    throw IoError(fmt::format("records path '{}' does not exist", path.string()));
  }
  std::vector<AssessmentRecord> out;
  for (const auto& f : files) {
    const auto text = read_file(f);
    std::size_t start = 0, line_no = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      ++line_no;
      const auto line = text.substr(start, end - start);
      start = end + 1;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(record_from_json_line(line));
      } catch (const DataError& e) {
        throw DataError(fmt::format("{}:{}: {}", f.string(), line_no, e.what()));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

scenario::ScenarioSpec scale_inflow(scenario::ScenarioSpec spec, double r) {
  if (r < 0) throw ConfigError("inflow scale must be nonnegative");
  for (double& q : spec.inflows) q *= 1.0 + r;
  return spec;
}

AssessmentRecord assess_scenario(const scenario::ScenarioSpec& spec, const PolicySet& policies,
                                 const AssessConfig& cfg, const EmissionProvider& emissions) {
  AssessmentRecord rec;
  rec.scenario_id = spec.id;
  rec.intersection = intersection_key(spec);
  rec.penetration = spec.penetration;
  rec.season = std::string(scenario::to_string(spec.season));
  rec.weather = std::string(scenario::to_string(spec.weather));
  rec.hour_type = std::string(scenario::to_string(spec.hour_type));
  rec.factors = factors_of(spec);
  rec.inflow_scale = cfg.inflow_scale;
  rec.tau_q = cfg.tau_q;
  const auto scaled = scale_inflow(spec, cfg.inflow_scale);

  auto evaluate = [&](const train::PolicyCheckpoint* ckpt, const std::string& id) {
    Candidate c;
    c.policy = id;
    c.metrics = to_metrics(train::evaluate_policy(ckpt, spec, cfg.seeds, cfg.horizon, cfg.sim, emissions));
    c.scaled_queue_ratio =
        train::evaluate_policy(ckpt, scaled, cfg.seeds, cfg.horizon, cfg.sim, emissions).queue_ratio;
    return c;
  };
  rec.candidates.push_back(evaluate(nullptr, kBaselineId));
  rec.baseline = rec.candidates.front().metrics;
  if (policies.pi1) rec.candidates.push_back(evaluate(&*policies.pi1, "pi1"));
  if (policies.pi2) rec.candidates.push_back(evaluate(&*policies.pi2, "pi2"));
  const auto best = select_policy(rec.candidates, cfg.tau_q);
  rec.selected = rec.candidates[best].policy;
  return rec;
}

double bisect_inflow_scale(const std::function<double(double)>& pass_fraction, double target, double lo, double hi,
                           int iterations) {
  if (!(lo <= hi)) throw ConfigError("inflow scale bracket is empty");
  if (pass_fraction(hi) >= target) return hi;
  if (pass_fraction(lo) < target) return lo;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pass_fraction(mid) >= target) lo = mid;
    else hi = mid;
  }
  return lo;
}

double baseline_queue_pass_fraction(const std::vector<scenario::ScenarioSpec>& specs, double r, const AssessConfig& cfg,
                                    const EmissionProvider& emissions) {
  if (specs.empty()) throw DataError("no scenarios");
  std::size_t pass = 0;
  for (const auto& s : specs) {
    const auto m = train::evaluate_policy(nullptr, scale_inflow(s, r), cfg.seeds, cfg.horizon, cfg.sim, emissions);
    if (m.queue_ratio <= cfg.tau_q) ++pass;
  }
  return static_cast<double>(pass) / static_cast<double>(specs.size());
}

}  // namespace ecodrive::assess
