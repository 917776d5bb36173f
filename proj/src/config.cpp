#include "lockstep/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "lockstep/error.hpp"

namespace lockstep {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError("");
        }
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) throw ConfigError("");
      for (const auto& e : v) {
        if (!e.is_number_unsigned()) throw ConfigError("");
      }
    }
    out = v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

BlobsSource parse_blobs(const json& j) {
  reject_unknown(j, {"kind", "classes", "per_class", "dim", "separation", "seed"}, "dataset");
  BlobsSource b;
  read(j, "classes", b.classes, "dataset");
  read(j, "per_class", b.per_class, "dataset");
  read(j, "dim", b.dim, "dataset");
  read(j, "separation", b.separation, "dataset");
  read(j, "seed", b.seed, "dataset");
  return b;
}

MnistSource parse_mnist(const json& j) {
  reject_unknown(j, {"kind", "images", "labels", "subset_n", "test_images", "test_labels"}, "dataset");
  MnistSource m;
  read(j, "images", m.images, "dataset");
  read(j, "labels", m.labels, "dataset");
  read(j, "subset_n", m.subset_n, "dataset");
  read(j, "test_images", m.test_images, "dataset");
  read(j, "test_labels", m.test_labels, "dataset");
  return m;
}

}  // namespace

void RunConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(test_split_fraction >= 0.0 && test_split_fraction < 1.0)) {
    throw ConfigError("test_split_fraction must be in [0, 1)");
  }
  for (std::size_t h : model.hidden) {
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
  }
  if (probe.cadence < 1) throw ConfigError("probe.cadence must be >= 1");
  if (probe.recent_max_age < 1) throw ConfigError("probe.recent_max_age must be >= 1");
  if (probe.ancient_min_age && *probe.ancient_min_age <= probe.recent_max_age) {
    throw ConfigError("probe.ancient_min_age must exceed probe.recent_max_age");
  }
  if (probe.probes_per_category < 1) throw ConfigError("probe.probes_per_category must be >= 1");
  if (probe.warmup_epochs < 0) throw ConfigError("probe.warmup_epochs must be >= 0");
  if (audit) {
    if (audit->every_k_steps < 1) throw ConfigError("audit.every_k_steps must be >= 1");
    if (audit->mode == AuditMode::sampled && audit->sample_size < 1) {
      throw ConfigError("audit.sample_size must be >= 1");
    }
  }
  if (const auto* b = std::get_if<BlobsSource>(&dataset)) {
    if (b->classes < 2) throw ConfigError("dataset.classes must be >= 2");
    if (b->per_class < 1) throw ConfigError("dataset.per_class must be >= 1");
    if (b->dim < 1) throw ConfigError("dataset.dim must be >= 1");
    if (!std::isfinite(b->separation) || b->separation < 0) {
      throw ConfigError("dataset.separation must be finite and >= 0");
    }
  } else {
    const auto& m = std::get<MnistSource>(dataset);
    if (m.images.empty() || m.labels.empty()) throw ConfigError("mnist dataset needs images and labels");
    if (m.test_images.empty() != m.test_labels.empty()) {
      throw ConfigError("mnist test_images and test_labels must be given together");
    }
  }
}

RunConfig parse_config(const json& doc) {
  reject_unknown(doc, {"dataset", "model", "eta", "batch_size", "epochs", "seed", "order", "probe",
                       "audit", "test_split_fraction", "out_dir"},
                 "config");
  RunConfig c;
  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    if (!d.is_object()) throw ConfigError("dataset must be an object");
    std::string kind = "blobs";
    read(d, "kind", kind, "dataset");
    if (kind == "blobs") {
      c.dataset = parse_blobs(d);
    } else if (kind == "mnist") {
      c.dataset = parse_mnist(d);
    } else {
      throw ConfigError("dataset.kind must be 'blobs' or 'mnist'");
    }
  }
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, {"hidden", "activation", "loss"}, "model");
    read(m, "hidden", c.model.hidden, "model");
    std::string s;
    if (m.contains("activation")) {
      read(m, "activation", s, "model");
      c.model.activation = parse_activation(s);
    }
    if (m.contains("loss")) {
      read(m, "loss", s, "model");
      c.model.loss = parse_loss_kind(s);
    }
  }
  read(doc, "eta", c.eta, "config");
  read(doc, "batch_size", c.batch_size, "config");
  read(doc, "epochs", c.epochs, "config");
  read(doc, "seed", c.seed, "config");
  read(doc, "test_split_fraction", c.test_split_fraction, "config");
  read(doc, "out_dir", c.out_dir, "config");
  if (doc.contains("order")) {
    std::string s;
    read(doc, "order", s, "config");
    if (s == "cyclic") {
      c.order = BatchOrder::cyclic;
    } else if (s == "shuffled") {
      c.order = BatchOrder::shuffled;
    } else {
      throw ConfigError("order must be 'cyclic' or 'shuffled'");
    }
  }
  if (doc.contains("probe")) {
    const auto& p = doc.at("probe");
    reject_unknown(p, {"enabled", "cadence", "recent_max_age", "ancient_min_age",
                       "probes_per_category", "rng_seed", "warmup_epochs"},
                   "probe");
    read(p, "enabled", c.probe.enabled, "probe");
    read(p, "cadence", c.probe.cadence, "probe");
    read(p, "recent_max_age", c.probe.recent_max_age, "probe");
    if (p.contains("ancient_min_age") && !p.at("ancient_min_age").is_null()) {
      std::int64_t v = 0;
      read(p, "ancient_min_age", v, "probe");
      c.probe.ancient_min_age = v;
    }
    read(p, "probes_per_category", c.probe.probes_per_category, "probe");
    if (p.contains("rng_seed") && !p.at("rng_seed").is_null()) {
      std::uint64_t v = 0;
      read(p, "rng_seed", v, "probe");
      c.probe.rng_seed = v;
    }
    read(p, "warmup_epochs", c.probe.warmup_epochs, "probe");
  }
  if (doc.contains("audit") && !doc.at("audit").is_null()) {
    const auto& a = doc.at("audit");
    reject_unknown(a, {"every_k_steps", "mode", "sample_size", "d_max"}, "audit");
    AuditConfig ac;
    read(a, "every_k_steps", ac.every_k_steps, "audit");
    if (a.contains("mode")) {
      std::string s;
      read(a, "mode", s, "audit");
      ac.mode = parse_audit_mode(s);
    }
    read(a, "sample_size", ac.sample_size, "audit");
    read(a, "d_max", ac.d_max, "audit");
    c.audit = ac;
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const RunConfig& c) {
  json j;
  if (const auto* b = std::get_if<BlobsSource>(&c.dataset)) {
    j["dataset"] = {{"kind", "blobs"},       {"classes", b->classes},       {"per_class", b->per_class},
                    {"dim", b->dim},         {"separation", b->separation}, {"seed", b->seed}};
  } else {
    const auto& m = std::get<MnistSource>(c.dataset);
    j["dataset"] = {{"kind", "mnist"},           {"images", m.images},
                    {"labels", m.labels},        {"subset_n", m.subset_n},
                    {"test_images", m.test_images}, {"test_labels", m.test_labels}};
  }
  j["model"] = {{"hidden", c.model.hidden},
                {"activation", std::string(to_string(c.model.activation))},
                {"loss", std::string(to_string(c.model.loss))}};
  j["eta"] = c.eta;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["order"] = c.order == BatchOrder::cyclic ? "cyclic" : "shuffled";
  json p = {{"enabled", c.probe.enabled},
            {"cadence", c.probe.cadence},
            {"recent_max_age", c.probe.recent_max_age},
            {"probes_per_category", c.probe.probes_per_category},
            {"warmup_epochs", c.probe.warmup_epochs}};
  p["ancient_min_age"] = c.probe.ancient_min_age ? json(*c.probe.ancient_min_age) : json(nullptr);
  p["rng_seed"] = c.probe.rng_seed ? json(*c.probe.rng_seed) : json(nullptr);
  j["probe"] = p;
  if (c.audit) {
    j["audit"] = {{"every_k_steps", c.audit->every_k_steps},
                  {"mode", std::string(to_string(c.audit->mode))},
                  {"sample_size", c.audit->sample_size},
                  {"d_max", c.audit->d_max}};
  } else {
    j["audit"] = nullptr;
  }
  j["test_split_fraction"] = c.test_split_fraction;
  j["out_dir"] = c.out_dir;
  return j;
}

}  // namespace lockstep
