#include "lnlab/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>
#include <sstream>

#include <json.hpp>

#include "lnlab/error.hpp"
#include "lnlab/optimal_transport.hpp"

namespace lnlab {

namespace {

using nlohmann::json;

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("expected an object at '" + where() + "'", where());
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + field(key) + "' has the wrong type", field(key));
    }
    check_sign(key, out);
  }

  template <typename T, typename Parse>
  void read_enum(const char* key, T& out, Parse parse) {
    std::string text;
    read(key, text);
    if (text.empty()) return;
    try {
      out = parse(text);
    } catch (const DomainError& e) {
      throw ConfigError("field '" + field(key) + "': " + e.what(), field(key));
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) {
        const std::string f = path_.empty() ? k : path_ + "." + k;
        throw ConfigError("unknown config key '" + f + "'", f);
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  template <typename T>
  void check_sign(const char* key, const T& v) {
    if constexpr (std::is_unsigned_v<T>) {
      // nlohmann wraps negative literals into huge unsigned values.
      const auto& raw = obj_.at(key);
      if (raw.is_number_integer() && !raw.is_number_unsigned() && raw.template get<long long>() < 0)
        throw ConfigError("field '" + field(key) + "' must be nonnegative", field(key));
      (void)v;
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m, ModelInit& init) {
  Section s(j, "model");
  s.read("d", m.d);
  s.read("n", m.n);
  s.read("k", m.k);
  s.read("m", m.m);
  s.read("heads", m.heads);
  s.read("depth", m.depth);
  s.read_enum("placement", m.placement, parse_placement);
  s.read("delta_t", m.delta_t);
  s.read_enum("activation", m.activation, parse_activation);
  s.read("epsilon", m.epsilon);
  s.read_enum("norm", m.norm_kind, [](const std::string& t) {
    if (t == "layernorm") return NormKind::LayerNorm;
    if (t == "rmsnorm") return NormKind::RMSNorm;
    throw DomainError("unknown norm '" + t + "' (expected layernorm or rmsnorm)");
  });
  s.read_enum("init", init, [](const std::string& t) {
    if (t == "random") return ModelInit::Random;
    if (t == "zero") return ModelInit::Zero;
    throw DomainError("unknown init '" + t + "' (expected random or zero)");
  });
  s.finish();
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.read_enum("task", t.task, parse_task);
  s.read("steps", t.steps);
  s.read("lr", t.lr);
  s.read("momentum", t.momentum);
  s.read("weight_decay", t.weight_decay);
  s.read("divergence_threshold", t.divergence_threshold);
  s.read("batch_size", t.batch_size);
  s.read("noise", t.noise);
  s.read("checkpoint_every", t.checkpoint_every);
  s.finish();
}

void read_sweep(const json& j, SweepConfig& w) {
  Section s(j, "sweep");
  std::vector<std::string> names;
  bool have_names = false;
  if (const json* p = s.child("placements")) {
    have_names = true;
    try {
      names = p->get<std::vector<std::string>>();
    } catch (const json::exception&) {
      throw ConfigError("field 'sweep.placements' must be a list of strings", "sweep.placements");
    }
  }
  if (have_names) {
    w.placements.clear();
    for (const auto& n : names) {
      try {
        w.placements.push_back(parse_placement(n));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("field 'sweep.placements': ") + e.what(), "sweep.placements");
      }
    }
  }
  s.read("weight_decays", w.weight_decays);
  s.read("seed_count", w.seed_count);
  s.finish();
}

void read_diagnostics(const json& j, DiagnosticsConfig& d) {
  Section s(j, "diagnostics");
  s.read("suites", d.suites);
  s.read("instances", d.instances);
  s.read("gradcheck_tolerance", d.gradcheck_tolerance);
  s.read("bound_slack", d.bound_slack);
  s.read("datawise_samples", d.datawise_samples);
  s.read("wasserstein_samples", d.wasserstein_samples);
  s.read("wasserstein_p", d.wasserstein_p);
  s.finish();
  static const std::set<std::string> known{"growth", "datawise", "pathwise", "wasserstein",
                                           "pre_chain"};
  for (const auto& name : d.suites)
    if (!known.count(name))
      throw ConfigError("unknown suite '" + name + "' in diagnostics.suites", "diagnostics.suites");
}

void validate(RunConfig& c) {
  try {
    c.train.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "model/train");
  }
  if (c.diagnostics.wasserstein_samples == 0 ||
      c.diagnostics.wasserstein_samples > kMaxTransportSamples)
    throw ConfigError("diagnostics.wasserstein_samples must lie in [1, 256]",
                      "diagnostics.wasserstein_samples");
  if (c.diagnostics.datawise_samples < 2)
    throw ConfigError("diagnostics.datawise_samples must be >= 2", "diagnostics.datawise_samples");
  if (!(c.diagnostics.wasserstein_p >= 1.0))
    throw ConfigError("diagnostics.wasserstein_p must be >= 1", "diagnostics.wasserstein_p");
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("config syntax error at line " + std::to_string(line) + ": " + e.what(),
                      "line " + std::to_string(line));
  }
  RunConfig c;
  Section root(doc, "");
  root.read("seed", c.seed);
  std::string output = c.output.string();
  root.read("output", output);
  c.output = output;
  root.read_enum("format", c.format, parse_format);
  if (const json* m = root.child("model")) read_model(*m, c.train.model, c.init);
  if (const json* t = root.child("train")) read_train(*t, c.train);
  if (const json* s = root.child("sweep")) read_sweep(*s, c.sweep);
  if (const json* d = root.child("diagnostics")) read_diagnostics(*d, c.diagnostics);
  root.finish();
  c.train.seed = c.seed;
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file '" + path.string() + "'", "--config");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& c) {
  const ModelConfig& m = c.model();
  json placements = json::array();
  for (Placement p : c.sweep.placements) placements.push_back(to_string(p));
  json doc = {
      {"seed", c.seed},
      {"output", c.output.string()},
      {"format", to_string(c.format)},
      {"model",
       {{"d", m.d},
        {"n", m.n},
        {"k", m.k},
        {"m", m.m},
        {"heads", m.heads},
        {"depth", m.depth},
        {"placement", to_string(m.placement)},
        {"delta_t", m.delta_t},
        {"activation", to_string(m.activation)},
        {"epsilon", m.epsilon},
        {"norm", m.norm_kind == NormKind::LayerNorm ? "layernorm" : "rmsnorm"},
        {"init", c.init == ModelInit::Random ? "random" : "zero"}}},
      {"train",
       {{"task", to_string(c.train.task)},
        {"steps", c.train.steps},
        {"lr", c.train.lr},
        {"momentum", c.train.momentum},
        {"weight_decay", c.train.weight_decay},
        {"divergence_threshold", c.train.divergence_threshold},
        {"batch_size", c.train.batch_size},
        {"noise", c.train.noise},
        {"checkpoint_every", c.train.checkpoint_every}}},
      {"sweep",
       {{"placements", placements},
        {"weight_decays", c.sweep.weight_decays},
        {"seed_count", c.sweep.seed_count}}},
      {"diagnostics",
       {{"suites", c.diagnostics.suites},
        {"instances", c.diagnostics.instances},
        {"gradcheck_tolerance", c.diagnostics.gradcheck_tolerance},
        {"bound_slack", c.diagnostics.bound_slack},
        {"datawise_samples", c.diagnostics.datawise_samples},
        {"wasserstein_samples", c.diagnostics.wasserstein_samples},
        {"wasserstein_p", c.diagnostics.wasserstein_p}}}};
  return doc.dump(2) + "\n";
}

}  // namespace lnlab
