#include "ecodrive/emissions.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fmt/core.h>

#include "ecodrive/binio.hpp"
#include "ecodrive/common.hpp"

namespace ecodrive::emissions {

double EnvironmentModel::multiplier(double temperature, double humidity) const {
  const double dt = (temperature - ref_temperature) / 10.0;
  const double dh = (humidity - ref_humidity) / 50.0;
  return 1.0 + k_temperature * dt * dt + k_humidity * dh * dh;
}

Coefficients base_coefficients(VehicleType type, Fuel fuel) {
  // Rows documented in docs/emissions.md.
  static const Coefficients table[kVehicleTypeCount][kFuelCount] = {
      {{{0.70, 0.042, 5.0e-4, 1.15e-4, 0.43, 0.043}}, {{0.63, 0.038, 4.5e-4, 1.04e-4, 0.39, 0.039}}},
      {{{0.95, 0.057, 7.0e-4, 1.60e-4, 0.58, 0.058}}, {{0.86, 0.051, 6.3e-4, 1.45e-4, 0.52, 0.052}}},
      {{{2.20, 0.160, 2.0e-3, 5.00e-4, 3.40, 0.340}}, {{2.00, 0.140, 1.8e-3, 4.50e-4, 3.00, 0.300}}},
      {{{2.00, 0.150, 2.0e-3, 4.00e-4, 3.00, 0.300}}, {{1.80, 0.130, 1.8e-3, 3.60e-4, 2.70, 0.270}}},
  };
  return table[static_cast<int>(type)][static_cast<int>(fuel)];
}

double age_multiplier(int age_bucket) {
  if (age_bucket < 0 || age_bucket >= kAgeBucketCount) throw ValidationError(fmt::format("age bucket {} out of range", age_bucket));
  return 1.0 + kAgeDegradationPerBucket * age_bucket;
}

double oracle_emission(const EmissionQuery& q, const EmissionKey& key, const EnvironmentModel& env) {
  const auto& c = base_coefficients(key.type, key.fuel).c;
  const double v = std::max(0.0, q.velocity);
  const double rate = c[0] + c[1] * v + c[2] * v * v + c[3] * v * v * v + c[4] * std::max(0.0, v * q.acceleration) +
                      c[5] * v * q.road_grade;
  return std::max(0.0, rate) * env.multiplier(q.temperature, q.humidity) * age_multiplier(key.age_bucket) * kStep;
}

double oracle_trace(const std::vector<double>& speeds, double initial_speed, const EmissionKey& key, double grade,
                    double temperature, double humidity, const EnvironmentModel& env) {
  double total = 0.0, prev = initial_speed;
  for (double v : speeds) {
    total += oracle_emission(EmissionQuery{v, (v - prev) / kStep, grade, temperature, humidity}, key, env);
    prev = v;
  }
  return total;
}

std::vector<EmissionKey> all_emission_keys() {
  std::vector<EmissionKey> keys;
  for (int t = 0; t < kVehicleTypeCount; ++t)
    for (int f = 0; f < kFuelCount; ++f)
      for (int a = 0; a < kAgeBucketCount; ++a) keys.push_back(EmissionKey{static_cast<VehicleType>(t), static_cast<Fuel>(f), a});
  return keys;
}

std::vector<double> TrajectoryPair::base() const { return std::vector<double>(static_cast<std::size_t>(n), v_base); }

std::vector<double> TrajectoryPair::extended() const {
  auto v = base();
  v.push_back(v_extra);
  return v;
}

QueryGrid default_query_grid() {
  QueryGrid g;
  for (int i = 0; i <= 30; ++i) g.speeds.push_back(i);
  for (int i = 0; i <= 15; ++i) g.accelerations.push_back(-4.5 + 0.5 * i);
  g.grades = {-4.0, 0.0, 4.0};
  g.temperatures = {0.0, 20.0, 35.0};
  g.humidities = {30.0, 70.0};
  return g;
}

namespace {

TrajectoryPair make_pair(double v_base, double accel, double grade, double temperature, double humidity) {
  TrajectoryPair p;
  p.v_base = v_base;
  p.v_extra = std::clamp(v_base + accel * kStep, 0.0, 30.0);
  p.grade = grade;
  p.temperature = temperature;
  p.humidity = humidity;
  return p;
}

}  // namespace

std::vector<TrajectoryPair> grid_pairs(const QueryGrid& grid) {
  std::vector<TrajectoryPair> out;
  out.reserve(grid.size());
  for (double v : grid.speeds)
    for (double a : grid.accelerations)
      for (double g : grid.grades)
        for (double t : grid.temperatures)
          for (double h : grid.humidities) out.push_back(make_pair(std::max(0.0, v - a * kStep), a, g, t, h));
  return out;
}

std::vector<TrajectoryPair> random_pairs(int count, std::uint64_t seed) {
  Rng rng = make_rng(seed, stream::sampling);
  std::uniform_real_distribution<double> speed(0.0, 30.0), accel(-4.5, 3.0), grade(-4.0, 4.0), temp(-10.0, 40.0),
      hum(10.0, 100.0);
  std::vector<TrajectoryPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double v = speed(rng), a = accel(rng), g = grade(rng), t = temp(rng), h = hum(rng);
    out.push_back(make_pair(v, a, g, t, h));
  }
  return out;
}

std::vector<Sample> build_dataset(const std::vector<EmissionKey>& keys, const std::vector<TrajectoryPair>& pairs,
                                  const EnvironmentModel& env) {
  std::vector<Sample> out;
  out.reserve(keys.size() * pairs.size());
  for (const auto& key : keys) {
    for (const auto& p : pairs) {
      const double eb = oracle_trace(p.base(), p.v_base, key, p.grade, p.temperature, p.humidity, env);
      const double ec = oracle_trace(p.extended(), p.v_base, key, p.grade, p.temperature, p.humidity, env);
      const EmissionQuery q{p.v_extra, (p.v_extra - p.v_base) / kStep, p.grade, p.temperature, p.humidity};
      out.push_back(Sample{key, q, ec - eb});
    }
  }
  return out;
}

std::string dataset_to_csv(const std::vector<Sample>& samples) {
  std::string out = "type,fuel,age,velocity,acceleration,grade,temperature,humidity,label\n";
  for (const auto& s : samples)
    out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", to_string(s.key.type),
                       to_string(s.key.fuel), s.key.age_bucket, s.features.velocity, s.features.acceleration,
                       s.features.road_grade, s.features.temperature, s.features.humidity, s.label);
  return out;
}

std::vector<Sample> dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "type,fuel,age,velocity,acceleration,grade,temperature,humidity,label")
    throw DataError("emission dataset lacks the expected header");
  std::vector<Sample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[9];
    for (auto& field : f)
      if (!std::getline(ls, field, ',')) throw DataError(fmt::format("dataset line {} has too few fields", lineno));
    try {
      Sample s;
      s.key = EmissionKey{parse_vehicle_type(f[0]), parse_fuel(f[1]), std::stoi(f[2])};
      s.features = EmissionQuery{std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
      s.label = std::stod(f[8]);
      out.push_back(s);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw DataError(fmt::format("dataset line {} is malformed", lineno));
    }
  }
  return out;
}

namespace {

std::array<double, 5> features_of(const EmissionQuery& q) {
  return {q.velocity, q.acceleration, q.road_grade, q.temperature, q.humidity};
}

double r_squared(const std::vector<double>& y, const std::vector<double>& yhat) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
}

}  // namespace

double EmissionModel::raw(const EmissionQuery& q) const {
  const auto f = features_of(q);
  double x[5];
  for (int i = 0; i < 5; ++i) x[i] = (f[static_cast<std::size_t>(i)] - in_mean[static_cast<std::size_t>(i)]) / in_std[static_cast<std::size_t>(i)];
  const auto y = net.predict(std::span<const double>(x, 5), 1, nn::Exec::serial);
  return y[0] * out_std + out_mean;
}

EmissionModel train_surrogate(const std::vector<Sample>& dataset, const EmissionKey& key, const SurrogateOptions& options,
                              FitReport* report) {
  std::vector<const Sample*> rows;
  for (const auto& s : dataset)
    if (s.key == key) rows.push_back(&s);
  if (static_cast<int>(rows.size()) < options.min_samples)
    throw DataError(fmt::format("key {} has {} samples; at least {} are required", to_string(key), rows.size(),
                                options.min_samples));

  Rng rng = make_rng(options.seed, stream::sampling);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto n_hold = static_cast<std::size_t>(std::floor(options.holdout * static_cast<double>(rows.size())));
  const std::size_t n_train = rows.size() - n_hold;

  EmissionModel m;
  m.key = key;
  for (std::size_t i = 0; i < n_train; ++i) {
    const auto f = features_of(rows[i]->features);
    for (int k = 0; k < 5; ++k) m.in_mean[static_cast<std::size_t>(k)] += f[static_cast<std::size_t>(k)] / static_cast<double>(n_train);
    m.out_mean += rows[i]->label / static_cast<double>(n_train);
  }
  for (std::size_t i = 0; i < n_train; ++i) {
    const auto f = features_of(rows[i]->features);
    for (std::size_t k = 0; k < 5; ++k) m.in_std[k] += (f[k] - m.in_mean[k]) * (f[k] - m.in_mean[k]) / static_cast<double>(n_train);
  }
  double var_out = 0.0;
  for (std::size_t i = 0; i < n_train; ++i) var_out += (rows[i]->label - m.out_mean) * (rows[i]->label - m.out_mean);
  m.out_std = std::sqrt(var_out / static_cast<double>(n_train));
  if (!(m.out_std > 0)) m.out_std = 1.0;
  for (auto& s : m.in_std) s = s > 0 ? std::sqrt(s) : 1.0;

  auto encode = [&](std::size_t begin, std::size_t end, std::vector<double>& x, std::vector<double>& y) {
    x.clear();
    y.clear();
    for (std::size_t i = begin; i < end; ++i) {
      const auto f = features_of(rows[i]->features);
      for (std::size_t k = 0; k < 5; ++k) x.push_back((f[k] - m.in_mean[k]) / m.in_std[k]);
      y.push_back((rows[i]->label - m.out_mean) / m.out_std);
    }
  };
  std::vector<double> x_train, y_train, x_hold, y_hold;
  encode(0, n_train, x_train, y_train);
  encode(n_train, rows.size(), x_hold, y_hold);

  m.net = nn::Mlp({5, options.hidden, 1});
  m.net.init_orthogonal(options.seed, 1.0, 1.0);
  nn::Adam adam(m.net.param_count(), nn::AdamConfig{options.lr, 0.9, 0.999, 1e-8, 0.0});
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(m.net.param_count()), xb, gout;
  nn::Workspace ws;
  const int batch = std::max(1, options.batch);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // Cosine decay to 2% of the initial rate.
    adam.config().lr = options.lr * (0.02 + 0.98 * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / options.epochs)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(batch));
      const int b = static_cast<int>(end - start);
      xb.resize(static_cast<std::size_t>(b) * 5);
      for (std::size_t r = start; r < end; ++r)
        std::copy_n(x_train.begin() + static_cast<std::ptrdiff_t>(order[r] * 5), 5, xb.begin() + static_cast<std::ptrdiff_t>((r - start) * 5));
      m.net.forward(xb, b, ws, nn::Exec::serial);
      gout.resize(static_cast<std::size_t>(b));
      for (int r = 0; r < b; ++r)
        gout[static_cast<std::size_t>(r)] = 2.0 * (ws.acts.back()[static_cast<std::size_t>(r)] - y_train[order[start + static_cast<std::size_t>(r)]]) / b;
      std::fill(grad.begin(), grad.end(), 0.0);
      m.net.backward(ws, gout, grad, nn::Exec::serial);
      adam.step(m.net.params(), grad);
    }
  }

  auto unscale = [&](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * m.out_std + m.out_mean;
    return out;
  };
  FitReport rep;
  rep.samples = rows.size();
  rep.train_r2 = r_squared(unscale(y_train), unscale(m.net.predict(x_train, static_cast<int>(n_train))));
  if (n_hold > 0) {
    const auto truth = unscale(y_hold);
    auto pred = unscale(m.net.predict(x_hold, static_cast<int>(n_hold)));
    for (auto& p : pred) p = std::max(0.0, p);
    rep.holdout_r2 = r_squared(truth, pred);
    double mae = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) mae += std::abs(truth[i] - pred[i]) / static_cast<double>(truth.size());
    rep.holdout_mae = mae;
  } else {
    rep.holdout_r2 = rep.train_r2;
  }
  if (report) *report = rep;
  if (rep.holdout_r2 < options.min_r2)
    throw FitFailure(fmt::format("surrogate for {} under-fits: held-out R^2 {:.5f} < {:.3f} (train R^2 {:.5f}, MAE {:.4f} g, {} samples)",
                                 to_string(key), rep.holdout_r2, options.min_r2, rep.train_r2, rep.holdout_mae, rep.samples),
                     rep);
  return m;
}

std::string serialize_model(const EmissionModel& m) {
  binio::Writer w;
  w.magic("ECOEMIS1");
  w.u32(static_cast<std::uint32_t>(kSchemaVersion));
  w.i32(static_cast<int>(m.key.type));
  w.i32(static_cast<int>(m.key.fuel));
  w.i32(m.key.age_bucket);
  w.u32(static_cast<std::uint32_t>(m.net.sizes().size()));
  for (int s : m.net.sizes()) w.i32(s);
  for (double v : m.in_mean) w.f64(v);
  for (double v : m.in_std) w.f64(v);
  w.f64(m.out_mean);
  w.f64(m.out_std);
  w.f64s(m.net.params());
  return w.bytes();
}

EmissionModel deserialize_model(const std::string& bytes) {
  binio::Reader r(bytes);
  r.expect_magic("ECOEMIS1");
  if (r.u32() != static_cast<std::uint32_t>(kSchemaVersion)) throw DataError("unsupported emission model version");
  EmissionModel m;
  const int type = r.i32(), fuel = r.i32(), age = r.i32();
  if (type < 0 || type >= kVehicleTypeCount || fuel < 0 || fuel >= kFuelCount || age < 0 || age >= kAgeBucketCount)
    throw DataError("emission model key out of range");
  m.key = EmissionKey{static_cast<VehicleType>(type), static_cast<Fuel>(fuel), age};
  const auto layers = r.u32();
  if (layers < 2 || layers > 16) throw DataError("emission model layer count out of range");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < layers; ++i) sizes.push_back(r.i32());
  if (sizes.front() != 5 || sizes.back() != 1) throw DataError("emission model must map 5 features to 1 output");
  for (int s : sizes)
    if (s <= 0 || s > 4096) throw DataError("emission model layer size out of range");
  for (double& v : m.in_mean) v = r.f64();
  for (double& v : m.in_std) v = r.f64();
  m.out_mean = r.f64();
  m.out_std = r.f64();
  m.net = nn::Mlp(sizes);
  auto params = r.f64s();
  if (params.size() != m.net.param_count()) throw DataError("emission model weight count does not match its layers");
  m.net.params() = std::move(params);
  if (!r.done()) throw DataError("trailing bytes after emission model");
  return m;
}

SurrogateProvider::SurrogateProvider(std::shared_ptr<const std::map<EmissionKey, EmissionModel>> models, bool use_cache,
                                     std::optional<EmissionKey> fallback)
    : models_(std::move(models)), use_cache_(use_cache), fallback_(fallback) {
  if (!models_ || models_->empty()) throw ConfigError("no emission models loaded");
  if (fallback_ && !models_->count(*fallback_)) throw ConfigError("fallback emission model is not loaded");
}

std::size_t SurrogateProvider::QueryHash::operator()(const EmissionQuery& q) const {
  auto bits = [](double d) { return std::bit_cast<std::uint64_t>(d); };
  return static_cast<std::size_t>(
      hash_combine(bits(q.velocity), bits(q.acceleration), bits(q.road_grade), bits(q.temperature), bits(q.humidity)));
}

const EmissionModel& SurrogateProvider::model_for(const EmissionKey& key) const {
  if (auto it = models_->find(key); it != models_->end()) return it->second;
  if (fallback_) return models_->at(*fallback_);
  throw ConfigError(fmt::format("no emission model for {}", to_string(key)));
}

double SurrogateProvider::grams(const EmissionKey& key, const EmissionQuery& q) {
  const EmissionModel& model = model_for(key);
  if (!use_cache_) return model.predict(q);
  auto& table = cache_[model.key];
  if (auto it = table.find(q); it != table.end()) {
    ++hits_;
    return it->second;
  }
  if (table.size() > 1'000'000) table.clear();
  const double g = model.predict(q);
  table.emplace(q, g);
  return g;
}

std::unique_ptr<EmissionProvider> SurrogateProvider::clone() const {
  return std::make_unique<SurrogateProvider>(models_, use_cache_, fallback_);
}

std::size_t SurrogateProvider::cache_size() const {
  std::size_t n = 0;
  for (const auto& [k, t] : cache_) n += t.size();
  return n;
}

}  // namespace ecodrive::emissions
