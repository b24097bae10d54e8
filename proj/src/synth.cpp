#include "atscc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "atscc/preprocess.hpp"

namespace atscc::synth {

namespace {

constexpr double kKnot = 1852.0 / 3600.0;

double rad(double deg) { return deg * std::numbers::pi / 180.0; }

bool finite_all(std::initializer_list<double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

void ProcedureSpec::validate() const {
  if (waypoints.size() < 2)
    throw std::invalid_argument("procedure " + std::to_string(class_id) + " needs at least 2 waypoints");
  if (!finite_all({entry_bearing_deg, entry_radius_m, entry_alt_m, runway_heading_deg, runway_offset_m,
                   final_length_m, faf_alt_m, threshold_alt_m}))
    throw std::invalid_argument("procedure " + std::to_string(class_id) + " has a non-finite parameter");
  if (entry_radius_m <= 0.0 || final_length_m <= 0.0)
    throw std::invalid_argument("procedure " + std::to_string(class_id) + " needs positive entry radius and final length");
  for (const auto& w : waypoints)
    if (!finite_all({w.x_m, w.y_m, w.alt_m}))
      throw std::invalid_argument("procedure " + std::to_string(class_id) + " has a non-finite waypoint");
}

std::vector<Vec3> ProcedureSpec::chain() const {
  const double b = rad(entry_bearing_deg);
  const double h = rad(runway_heading_deg);
  // Landing direction and its right-hand normal, east/north components.
  const Vec3 dir{std::sin(h), std::cos(h), 0.0};
  const Vec3 right{std::cos(h), -std::sin(h), 0.0};
  const Vec3 threshold = runway_offset_m * right;

  std::vector<Vec3> out;
  out.push_back({entry_radius_m * std::sin(b), entry_radius_m * std::cos(b), entry_alt_m});
  for (const auto& w : waypoints) out.push_back({w.x_m, w.y_m, w.alt_m});
  Vec3 faf = threshold - final_length_m * dir;
  faf.z = faf_alt_m;
  out.push_back(faf);
  out.push_back({threshold.x, threshold.y, threshold_alt_m});
  return out;
}

std::vector<Trajectory> generate(const std::vector<ProcedureSpec>& specs, const GenerateOptions& options) {
  if (specs.size() < 2) throw std::invalid_argument("need at least 2 procedure specs");
  if (options.per_class == 0) throw std::invalid_argument("per-class count must be positive");
  if (options.noise_h_m < 0 || options.noise_v_m < 0 || options.entry_jitter_m < 0)
    throw std::invalid_argument("noise and jitter must be non-negative");
  if (!(options.enroute_kn > 0 && options.final_kn > 0)) throw std::invalid_argument("speeds must be positive");
  for (const auto& s : specs) s.validate();

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Trajectory> out;
  out.reserve(specs.size() * options.per_class);
  for (const auto& spec : specs) {
    const std::vector<Vec3> nominal = spec.chain();
    for (std::size_t n = 0; n < options.per_class; ++n) {
      std::vector<Vec3> chain = nominal;
      const double r = 0.5 * options.entry_jitter_m * std::sqrt(unit(rng));
      const double a = 2.0 * std::numbers::pi * unit(rng);
      chain.front().x += r * std::cos(a);
      chain.front().y += r * std::sin(a);

      // Vertex times; the last leg is flown at final speed.
      std::vector<double> t_at(chain.size(), 0.0);
      for (std::size_t k = 1; k < chain.size(); ++k) {
        const double speed = (k + 1 == chain.size() ? options.final_kn : options.enroute_kn) * kKnot;
        t_at[k] = t_at[k - 1] + norm(chain[k] - chain[k - 1]) / speed;
      }

      Trajectory traj;
      traj.id = "synth-c" + std::to_string(spec.class_id) + "-" + std::to_string(n);
      traj.label = spec.class_id;
      traj.units = Units::meters;
      std::size_t leg = 1;
      const auto steps = static_cast<std::size_t>(std::floor(t_at.back()));
      for (std::size_t s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s);
        while (leg + 1 < chain.size() && t > t_at[leg]) ++leg;
        const double span = t_at[leg] - t_at[leg - 1];
        const double u = span > 0 ? std::clamp((t - t_at[leg - 1]) / span, 0.0, 1.0) : 1.0;
        Vec3 p = chain[leg - 1] + u * (chain[leg] - chain[leg - 1]);
        p.x += options.noise_h_m * gauss(rng);
        p.y += options.noise_h_m * gauss(rng);
        p.z += options.noise_v_m * gauss(rng);
        traj.states.push_back(p);
      }
      out.push_back(std::move(traj));
    }
  }
  return out;
}

Scenario default_scenario() {
  Scenario s;
  s.r_max_m = 30000.0;
  s.downsample_s = 10;
  s.options.per_class = 50;
  const double offsets[] = {-750.0, 750.0};
  for (int corridor = 0; corridor < 2; ++corridor) {
    // West corridor and its mirror image east of the airport.
    const double side = corridor == 0 ? -1.0 : 1.0;
    for (int runway = 0; runway < 2; ++runway) {
      ProcedureSpec p;
      p.class_id = corridor * 2 + runway;
      p.entry_bearing_deg = corridor == 0 ? 235.0 : 125.0;
      p.entry_radius_m = 24000.0;
      p.entry_alt_m = 3000.0;
      p.waypoints = {{side * 12000.0, -17000.0, 2400.0}, {side * 4000.0, -16000.0, 1500.0}};
      p.runway_heading_deg = 360.0;
      p.runway_offset_m = offsets[runway];
      p.final_length_m = 9000.0;
      p.faf_alt_m = 800.0;
      s.procedures.push_back(p);
    }
  }
  return s;
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("scenario: bad number for " + key + ": '" + v + "'");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Scenario parse_scenario(const io::KeyValues& kv) {
  Scenario s;
  ProcedureSpec* cur = nullptr;
  for (const auto& [key, value] : kv) {
    if (key == "[procedure]") {
      s.procedures.emplace_back();
      cur = &s.procedures.back();
      continue;
    }
    if (cur == nullptr) {
      if (key == "r_max_m") s.r_max_m = to_double(key, value);
      else if (key == "downsample_s") s.downsample_s = static_cast<std::size_t>(to_double(key, value));
      else if (key == "per_class") s.options.per_class = static_cast<std::size_t>(to_double(key, value));
      else if (key == "noise_h_m") s.options.noise_h_m = to_double(key, value);
      else if (key == "noise_v_m") s.options.noise_v_m = to_double(key, value);
      else if (key == "entry_jitter_m") s.options.entry_jitter_m = to_double(key, value);
      else if (key == "enroute_kn") s.options.enroute_kn = to_double(key, value);
      else if (key == "final_kn") s.options.final_kn = to_double(key, value);
      else if (key == "seed") s.options.seed = static_cast<std::uint64_t>(to_double(key, value));
      else throw std::invalid_argument("scenario: unknown key '" + key + "'");
      continue;
    }
    if (key == "class") cur->class_id = static_cast<int>(to_double(key, value));
    else if (key == "entry_bearing_deg") cur->entry_bearing_deg = to_double(key, value);
    else if (key == "entry_radius_m") cur->entry_radius_m = to_double(key, value);
    else if (key == "entry_alt_m") cur->entry_alt_m = to_double(key, value);
    else if (key == "runway_heading_deg") cur->runway_heading_deg = to_double(key, value);
    else if (key == "runway_offset_m") cur->runway_offset_m = to_double(key, value);
    else if (key == "final_length_m") cur->final_length_m = to_double(key, value);
    else if (key == "faf_alt_m") cur->faf_alt_m = to_double(key, value);
    else if (key == "threshold_alt_m") cur->threshold_alt_m = to_double(key, value);
    else if (key == "waypoint") {
      std::istringstream in(value);
      Waypoint w;
      std::string extra;
      if (!(in >> w.x_m >> w.y_m >> w.alt_m) || (in >> extra))
        throw std::invalid_argument("scenario: waypoint needs 'x y alt', got '" + value + "'");
      cur->waypoints.push_back(w);
    } else {
      throw std::invalid_argument("scenario: unknown procedure key '" + key + "'");
    }
  }
  if (s.procedures.size() < 2) throw std::invalid_argument("scenario: need at least 2 procedures");
  if (!(s.r_max_m > 0)) throw std::invalid_argument("scenario: r_max_m must be positive");
  for (const auto& p : s.procedures) p.validate();
  return s;
}

Scenario read_scenario(const std::filesystem::path& path) { return parse_scenario(io::read_key_values(path)); }

io::KeyValues scenario_to_key_values(const Scenario& s) {
  io::KeyValues kv{{"r_max_m", fmt(s.r_max_m)},
                   {"downsample_s", std::to_string(s.downsample_s)},
                   {"per_class", std::to_string(s.options.per_class)},
                   {"noise_h_m", fmt(s.options.noise_h_m)},
                   {"noise_v_m", fmt(s.options.noise_v_m)},
                   {"entry_jitter_m", fmt(s.options.entry_jitter_m)},
                   {"enroute_kn", fmt(s.options.enroute_kn)},
                   {"final_kn", fmt(s.options.final_kn)},
                   {"seed", std::to_string(s.options.seed)}};
  for (const auto& p : s.procedures) {
    kv.emplace_back("[procedure]", "");
    kv.emplace_back("class", std::to_string(p.class_id));
    kv.emplace_back("entry_bearing_deg", fmt(p.entry_bearing_deg));
    kv.emplace_back("entry_radius_m", fmt(p.entry_radius_m));
    kv.emplace_back("entry_alt_m", fmt(p.entry_alt_m));
    for (const auto& w : p.waypoints) kv.emplace_back("waypoint", fmt(w.x_m) + " " + fmt(w.y_m) + " " + fmt(w.alt_m));
    kv.emplace_back("runway_heading_deg", fmt(p.runway_heading_deg));
    kv.emplace_back("runway_offset_m", fmt(p.runway_offset_m));
    kv.emplace_back("final_length_m", fmt(p.final_length_m));
    kv.emplace_back("faf_alt_m", fmt(p.faf_alt_m));
    kv.emplace_back("threshold_alt_m", fmt(p.threshold_alt_m));
  }
  return kv;
}

Dataset prepare(const std::vector<Trajectory>& flights, const Scenario& scenario) {
  preprocess::EnuFrame frame;
  frame.r_max_m = scenario.r_max_m;
  std::vector<Trajectory> out;
  out.reserve(flights.size());
  for (const auto& f : flights) {
    preprocess::TimedTrack track;
    track.id = f.id;
    track.states = f.states;
    for (std::size_t t = 0; t < f.states.size(); ++t) track.times.push_back(static_cast<double>(t));
    track = preprocess::savgol_smooth(track);
    Trajectory traj{f.id, track.states, f.label, Units::meters};
    traj = preprocess::scale_by_rmax(traj, frame);
    if (scenario.downsample_s > 1) traj = preprocess::downsample(traj, scenario.downsample_s);
    out.push_back(std::move(traj));
  }
  Dataset data = pad_dataset(out);
  data.meta().set("source", "synthetic");
  data.meta().set("r_max_m", fmt(scenario.r_max_m));
  data.meta().set("stages", "synth,savgol,scale,downsample");
  data.meta().set("downsample_s", std::to_string(scenario.downsample_s));
  return data;
}

std::pair<Dataset, Dataset> make_train_test(const Scenario& scenario) {
  GenerateOptions opts = scenario.options;
  opts.per_class *= 2;
  auto flights = generate(scenario.procedures, opts);
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  for (std::size_t i = 0; i < flights.size(); ++i) ((i % 2 == 0) ? train : test).push_back(std::move(flights[i]));
  return {prepare(train, scenario), prepare(test, scenario)};
}

}  // namespace atscc::synth
