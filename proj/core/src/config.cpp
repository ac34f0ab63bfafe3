#include "uwauth/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"
#include "uwauth/error.hpp"

namespace uwauth::config {
namespace {

using Json = nlohmann::ordered_json;

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported together.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(name() + " must be a JSON object");
  }

  std::string name() const { return path_.empty() ? "config" : path_; }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) throw ValidationError(field(key) + " must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ValidationError(field(key) + " must be finite");
    return x;
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_unsigned()) throw ValidationError(field(key) + " must be a non-negative integer");
    return v->get<std::uint64_t>();
  }

  long signed_int(const std::string& key, long def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ValidationError(field(key) + " must be an integer");
    return v->get<long>();
  }

  bool boolean(const std::string& key, bool def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ValidationError(field(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) {
    const Json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) throw ValidationError(field(key) + " must be a string");
    return v->get<std::string>();
  }

  void finish(std::vector<std::string>& unknown) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) unknown.push_back(field(it.key()));
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const Json kEmpty = Json::object();

const Json& sub(Section& parent, const std::string& key) {
  const Json* v = parent.raw(key);
  return v ? *v : kEmpty;
}

template <class F>
void rethrow_as(const std::string& where, F&& f) {
  try {
    f();
  } catch (const DomainError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

std::string fmt_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// enum <-> text tables

template <class E>
struct Named {
  E value;
  const char* name;
};

constexpr Named<sim::ChannelMode> kChannelModes[] = {
    {sim::ChannelMode::kAwgnFeatures, "awgn_features"},
    {sim::ChannelMode::kColoredWaveform, "colored_waveform"}};
constexpr Named<sim::OccupantLaw> kOccupantLaws[] = {{sim::OccupantLaw::kEqualPriors, "equal_priors"},
                                                     {sim::OccupantLaw::kEveOnly, "eve_only"},
                                                     {sim::OccupantLaw::kAliceOnly, "alice_only"}};
constexpr Named<detect::Mode> kDetectionModes[] = {{detect::Mode::kFull, "full"},
                                                   {detect::Mode::kDistanceOnly, "distance_only"}};
constexpr Named<detect::FusionRule> kRules[] = {{detect::FusionRule::kAnd, "and"},
                                                {detect::FusionRule::kOr, "or"},
                                                {detect::FusionRule::kMajority, "mv"}};
constexpr Named<ranging::SlotBoundary> kBoundaries[] = {{ranging::SlotBoundary::kCyclic, "cyclic"},
                                                        {ranging::SlotBoundary::kZeroPad, "zero_pad"}};
constexpr Named<ranging::AmplitudeMode> kAmplitudes[] = {
    {ranging::AmplitudeMode::kEstimated, "estimated"}, {ranging::AmplitudeMode::kOracle, "oracle"}};
constexpr Named<ranging::CrbForm> kCrbForms[] = {{ranging::CrbForm::kPaper, "factor4"},
                                                 {ranging::CrbForm::kFisher, "fisher"}};

template <class E, std::size_t N>
E from_name(const Named<E> (&table)[N], const std::string& s, const std::string& field) {
  for (const auto& t : table) {
    if (s == t.name) return t.value;
  }
  std::string msg = field + ": unknown value '" + s + "' (expected";
  for (std::size_t i = 0; i < N; ++i) msg += std::string(i ? "|" : " ") + table[i].name;
  throw ValidationError(msg + ")");
}

template <class E, std::size_t N>
const char* name_of(const Named<E> (&table)[N], E v) {
  for (const auto& t : table) {
    if (t.value == v) return t.name;
  }
  return "?";
}

geometry::EveScenario parse_eve(Section& s) {
  const std::string kind = s.text("scenario", "outside_ring");
  if (kind == "outside_ring") {
    geometry::scenario::OutsideRing r;
    r.k = s.number("k", r.k);
    r.epsilon = s.number("epsilon", r.epsilon);
    if (!(r.k > 1.0)) throw ValidationError("eve.k must exceed 1");
    if (!(r.epsilon > 0.0)) throw ValidationError("eve.epsilon must be positive");
    return r;
  }
  if (kind == "inside_uniform") return geometry::scenario::InsideUniform{};
  if (kind == "worst_case_aoa") {
    geometry::scenario::WorstCaseAoA w;
    w.target = s.unsigned_int("target", w.target);
    w.radial_offset = s.number("radial_offset", w.radial_offset);
    return w;
  }
  if (kind == "worst_case_distance") {
    geometry::scenario::WorstCaseDistance w;
    w.target = s.unsigned_int("target", w.target);
    w.angular_offset = s.number("angular_offset", w.angular_offset);
    return w;
  }
  if (kind == "fixed") {
    geometry::scenario::Fixed f;
    f.position.distance = s.number("distance", 0.0);
    f.position.aoa = s.number("aoa", 0.0);
    if (!s.has("distance") || !s.has("aoa")) throw ValidationError("eve.fixed needs distance and aoa");
    if (!(f.position.distance > 0.0)) throw ValidationError("eve.distance must be positive");
    if (!(f.position.aoa >= 0.0 && f.position.aoa <= 180.0)) {
      throw ValidationError("eve.aoa must lie in [0, 180] degrees");
    }
    return f;
  }
  throw ValidationError("eve.scenario: unknown value '" + kind +
                        "' (expected outside_ring|inside_uniform|worst_case_aoa|"
                        "worst_case_distance|fixed)");
}

Json eve_json(const geometry::EveScenario& sc) {
  Json j;
  j["scenario"] = std::string(to_string(sc));
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, geometry::scenario::OutsideRing>) {
          j["k"] = v.k;
          j["epsilon"] = v.epsilon;
        } else if constexpr (std::is_same_v<T, geometry::scenario::WorstCaseAoA>) {
          j["target"] = v.target;
          j["radial_offset"] = v.radial_offset;
        } else if constexpr (std::is_same_v<T, geometry::scenario::WorstCaseDistance>) {
          j["target"] = v.target;
          j["angular_offset"] = v.angular_offset;
        } else if constexpr (std::is_same_v<T, geometry::scenario::Fixed>) {
          j["distance"] = v.position.distance;
          j["aoa"] = v.position.aoa;
        }
      },
      sc);
  return j;
}

std::vector<double> number_list(const Json& v, const std::string& field) {
  if (!v.is_array()) throw ValidationError(field + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ValidationError(field + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void resolve(ExperimentConfig& cfg) {
  auto& exp = cfg.experiment;
  auto& g = cfg.geometry;
  exp.deployment.d0 = g.d0;
  exp.deployment.d_min = g.d_min;
  rethrow_as("geometry", [&] {
    if (g.nodes) {
      exp.deployment.alice = *g.nodes;
    } else {
      if (g.m < 1) throw DomainError("M must be at least 1");
      Rng rng(g.seed);
      exp.deployment.alice = geometry::deploy_alice(g.m, g.d0, g.d_min, rng);
    }
    exp.deployment.validate();
  });
  g.m = exp.deployment.m();
  exp.thresholds.d0 = g.d0;
  rethrow_as("thresholds", [&] { exp.thresholds.validate(); });

  // a throwaway placement catches worst-case offsets that leave the region
  rethrow_as("eve", [&] {
    Rng rng(0);
    exp.deployment.eve = geometry::place_eve(exp.eve, exp.deployment, rng);
  });

  auto& ch = exp.colored;
  rethrow_as("channel", [&] {
    ch.acoustic.validate();
    (void)ch.waveform();
  });
  if (ch.window_offset >= 0 &&
      static_cast<std::size_t>(ch.window_offset) > ch.waveform().max_contained_delay()) {
    throw ValidationError("channel.window_offset leaves the waveform outside the slot");
  }
  ch.pt_lin = db_to_linear(cfg.p_t_db);
  cfg.conversions.clear();
  cfg.conversions.push_back("channel.p_t_db " + fmt_g(cfg.p_t_db) + " dB -> P_T " + fmt_g(ch.pt_lin));
  for (double s : exp.plan.snr_grid_db) {
    cfg.conversions.push_back("plan.snr_grid_db " + fmt_g(s) + " dB -> SNR " + fmt_g(sim::snr_linear(s)) +
                              ", sigma " + fmt_g(sim::sigma_from_snr_db(s)));
  }
  exp.plan.validate();
  for (const auto& f : cfg.outputs.formats) {
    if (f != "csv" && f != "json") throw ValidationError("outputs.formats: unknown format '" + f + "' (expected csv|json)");
  }
  if (cfg.outputs.formats.empty()) throw ValidationError("outputs.formats must not be empty");
}

}  // namespace

std::string_view to_string(const geometry::EveScenario& s) {
  switch (s.index()) {
    case 0: return "outside_ring";
    case 1: return "inside_uniform";
    case 2: return "worst_case_aoa";
    case 3: return "worst_case_distance";
    default: return "fixed";
  }
}

ExperimentConfig parse_config(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  auto& exp = cfg.experiment;
  std::vector<std::string> unknown;
  Section top(root, "");
  exp.scenario_id = top.text("scenario_id", exp.scenario_id);

  {
    Section s(sub(top, "geometry"), "geometry");
    auto& g = cfg.geometry;
    // d0 and M are also accepted at the top level
    for (const char* key : {"d0", "M"}) {
      if (top.has(key) && s.has(key)) throw ValidationError(std::string(key) + " given twice (top level and geometry)");
    }
    g.d0 = top.has("d0") ? top.number("d0", g.d0) : s.number("d0", g.d0);
    g.m = top.has("M") ? top.unsigned_int("M", g.m) : s.unsigned_int("M", g.m);
    g.d_min = s.number("d_min", g.d_min);
    g.seed = s.unsigned_int("seed", g.seed);
    if (const Json* nodes = s.raw("nodes")) {
      if (!nodes->is_array()) throw ValidationError("geometry.nodes must be an array");
      std::vector<geometry::PolarPosition> list;
      for (std::size_t i = 0; i < nodes->size(); ++i) {
        Section n((*nodes)[i], "geometry.nodes[" + std::to_string(i) + "]");
        geometry::PolarPosition p;
        p.distance = n.number("distance", -1.0);
        p.aoa = n.number("aoa", -1.0);
        n.finish(unknown);
        list.push_back(p);
      }
      if (s.has("M") && list.size() != g.m) throw ValidationError("geometry.M differs from the node count");
      g.nodes = std::move(list);
    }
    if (!(g.d0 > 0.0)) throw ValidationError("geometry.d0 must be positive");
    if (!(g.d_min >= 0.0 && g.d_min < g.d0)) throw ValidationError("geometry.d_min must satisfy 0 <= d_min < d0");
    s.finish(unknown);
  }
  {
    Section s(sub(top, "eve"), "eve");
    exp.eve = parse_eve(s);
    s.finish(unknown);
  }
  {
    Section s(sub(top, "channel"), "channel");
    auto& ch = exp.colored;
    auto& a = ch.acoustic;
    exp.plan.channel_mode = from_name(kChannelModes, s.text("mode", "awgn_features"), "channel.mode");
    a.nu = s.number("nu", a.nu);
    a.n1 = s.number("n1_db", a.n1);
    a.zeta = s.number("zeta", a.zeta);
    a.band_lo_khz = s.number("band_lo_khz", a.band_lo_khz);
    a.band_hi_khz = s.number("band_hi_khz", a.band_hi_khz);
    a.carrier_khz = s.number("carrier_khz", a.carrier_khz);
    cfg.p_t_db = s.number("p_t_db", cfg.p_t_db);
    ch.q = s.unsigned_int("q", ch.q);
    ch.t_b = s.number("t_b", ch.t_b);
    ch.t_s_sample = s.number("t_s_sample", ch.t_s_sample);
    ch.switching_delay = s.number("switching_delay", ch.switching_delay);
    ch.t0 = s.number("t0", ch.t0);
    ch.pn_length = s.unsigned_int("pn_length", ch.pn_length);
    ch.pn_seed = static_cast<std::uint32_t>(s.unsigned_int("pn_seed", ch.pn_seed));
    {
      Section p(sub(s, "pulse"), "channel.pulse");
      const auto shape = p.text("shape", "raised_cosine");
      if (shape != "raised_cosine") throw ValidationError("channel.pulse.shape: only raised_cosine is supported");
      ch.rolloff = p.number("rolloff", ch.rolloff);
      p.finish(unknown);
    }
    ch.boundary = from_name(kBoundaries, s.text("boundary", "cyclic"), "channel.boundary");
    ch.window_offset = s.signed_int("window_offset", ch.window_offset);
    ch.amplitude = from_name(kAmplitudes, s.text("amplitude", "estimated"), "channel.amplitude");
    ch.crb_form = from_name(kCrbForms, s.text("crb_form", "factor4"), "channel.crb_form");
    ch.white = s.boolean("white_noise", ch.white);
    if (!(ch.switching_delay >= 0.0)) throw ValidationError("channel.switching_delay must be non-negative");
    s.finish(unknown);
  }
  {
    Section s(sub(top, "thresholds"), "thresholds");
    auto& t = exp.thresholds;
    t.eps_p = s.number("eps_p", t.eps_p);
    t.eps_d = s.number("eps_d", t.eps_d);
    t.eps_theta = s.number("eps_theta", t.eps_theta);
    s.finish(unknown);
  }
  {
    Section s(sub(top, "plan"), "plan");
    auto& p = exp.plan;
    if (const Json* grid = s.raw("snr_grid_db")) {
      p.snr_grid_db = number_list(*grid, "plan.snr_grid_db");
    } else {
      for (int x = -10; x <= 30; x += 5) p.snr_grid_db.push_back(x);
    }
    p.n_trials = s.unsigned_int("n_trials", p.n_trials);
    p.seed = s.unsigned_int("seed", p.seed);
    p.occupant_law = from_name(kOccupantLaws, s.text("occupant_law", "equal_priors"), "plan.occupant_law");
    const char* def_mode = p.channel_mode == sim::ChannelMode::kColoredWaveform ? "distance_only" : "full";
    p.detection_mode = from_name(kDetectionModes, s.text("detection_mode", def_mode), "plan.detection_mode");
    p.final_rule = from_name(kRules, s.text("final_rule", "and"), "plan.final_rule");
    s.finish(unknown);
  }
  {
    Section s(sub(top, "outputs"), "outputs");
    cfg.outputs.directory = s.text("directory", cfg.outputs.directory);
    if (const Json* f = s.raw("formats")) {
      if (!f->is_array()) throw ValidationError("outputs.formats must be an array of strings");
      cfg.outputs.formats.clear();
      for (const auto& x : *f) {
        if (!x.is_string()) throw ValidationError("outputs.formats must be an array of strings");
        cfg.outputs.formats.push_back(x.get<std::string>());
      }
    }
    s.finish(unknown);
  }
  top.finish(unknown);
  if (!unknown.empty()) {
    std::string msg = "unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  resolve(cfg);
  return cfg;
}

std::string to_json(const ExperimentConfig& cfg, int indent) {
  const auto& exp = cfg.experiment;
  const auto& ch = exp.colored;
  Json j;
  j["scenario_id"] = exp.scenario_id;
  Json g;
  g["d0"] = cfg.geometry.d0;
  g["M"] = cfg.geometry.m;
  g["d_min"] = cfg.geometry.d_min;
  g["seed"] = cfg.geometry.seed;
  if (cfg.geometry.nodes) {
    g["nodes"] = Json::array();
    for (const auto& p : *cfg.geometry.nodes) g["nodes"].push_back({{"distance", p.distance}, {"aoa", p.aoa}});
  }
  j["geometry"] = g;
  j["eve"] = eve_json(exp.eve);
  Json c;
  c["mode"] = name_of(kChannelModes, exp.plan.channel_mode);
  c["nu"] = ch.acoustic.nu;
  c["n1_db"] = ch.acoustic.n1;
  c["zeta"] = ch.acoustic.zeta;
  c["band_lo_khz"] = ch.acoustic.band_lo_khz;
  c["band_hi_khz"] = ch.acoustic.band_hi_khz;
  c["carrier_khz"] = ch.acoustic.carrier_khz;
  c["p_t_db"] = cfg.p_t_db;
  c["q"] = ch.q;
  c["t_b"] = ch.t_b;
  c["t_s_sample"] = ch.t_s_sample;
  c["switching_delay"] = ch.switching_delay;
  c["t0"] = ch.t0;
  c["pn_length"] = ch.pn_length;
  c["pn_seed"] = ch.pn_seed;
  c["pulse"] = {{"shape", "raised_cosine"}, {"rolloff", ch.rolloff}};
  c["boundary"] = name_of(kBoundaries, ch.boundary);
  c["window_offset"] = ch.window_offset;
  c["amplitude"] = name_of(kAmplitudes, ch.amplitude);
  c["crb_form"] = name_of(kCrbForms, ch.crb_form);
  c["white_noise"] = ch.white;
  j["channel"] = c;
  j["thresholds"] = {{"eps_p", exp.thresholds.eps_p},
                     {"eps_d", exp.thresholds.eps_d},
                     {"eps_theta", exp.thresholds.eps_theta}};
  Json p;
  p["snr_grid_db"] = exp.plan.snr_grid_db;
  p["n_trials"] = exp.plan.n_trials;
  p["seed"] = exp.plan.seed;
  p["occupant_law"] = name_of(kOccupantLaws, exp.plan.occupant_law);
  p["detection_mode"] = name_of(kDetectionModes, exp.plan.detection_mode);
  p["final_rule"] = name_of(kRules, exp.plan.final_rule);
  j["plan"] = p;
  j["outputs"] = {{"directory", cfg.outputs.directory}, {"formats", cfg.outputs.formats}};
  return j.dump(indent);
}

std::vector<std::pair<std::string, ExperimentConfig>> scenario_presets() {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  auto add = [&out](const std::string& id, Json j) {
    j["scenario_id"] = id;
    out.emplace_back(id, parse_config(j.dump()));
  };
  add("outside_ring", {{"eve", {{"scenario", "outside_ring"}, {"k", 2.0}, {"epsilon", 1.0}}}});
  add("inside_uniform", {{"eve", {{"scenario", "inside_uniform"}}}});
  add("worst_case", {{"eve", {{"scenario", "worst_case_aoa"}, {"target", 0}, {"radial_offset", 50.0}}},
                     {"plan", {{"occupant_law", "eve_only"}, {"n_trials", 10000}}}});
  add("colored", {{"channel",
                   {{"mode", "colored_waveform"}, {"p_t_db", 30.0}, {"boundary", "zero_pad"}}},
                  {"plan", {{"n_trials", 10000}}}});
  return out;
}

}  // namespace uwauth::config
