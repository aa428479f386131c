#include "gglab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace gglab {

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

nlohmann::json convert(const toml::node& node, const std::string& pointer,
                       std::map<std::string, int>& lines) {
  lines[pointer] = static_cast<int>(node.source().begin.line);
  if (const auto* t = node.as_table()) {
    auto obj = nlohmann::json::object();
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      obj[key] = convert(v, pointer + "/" + escape_token(key), lines);
    }
    return obj;
  }
  if (const auto* a = node.as_array()) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < a->size(); ++i)
      arr.push_back(convert((*a)[i], pointer + "/" + std::to_string(i), lines));
    return arr;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  std::ostringstream os;
  node.visit([&os](const auto& v) { os << v; });
  return os.str();
}

int line_at_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

}  // namespace

std::optional<int> ConfigDocument::line_of(const std::string& pointer) const {
  std::string p = pointer;
  for (;;) {
    if (auto it = lines.find(p); it != lines.end() && it->second > 0) return it->second;
    if (p.empty()) return std::nullopt;
    p.erase(p.rfind('/'));
  }
}

void ConfigDocument::fail(const std::string& pointer, const std::string& message) const {
  std::string where = origin;
  if (auto line = line_of(pointer)) where += ":" + std::to_string(*line);
  std::string msg = where + ": " + message;
  if (!pointer.empty()) msg += " (at " + pointer + ")";
  throw ConfigError(msg);
}

ConfigDocument load_config_string(const std::string& text, ConfigFormat format,
                                  const std::string& origin) {
  ConfigDocument doc;
  doc.origin = origin;
  doc.text = text;
  if (format == ConfigFormat::json) {
    try {
      doc.root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(origin + ":" + std::to_string(line_at_offset(text, e.byte)) + ": " + e.what());
    }
  } else {
    try {
      const toml::table table = toml::parse(text, origin);
      doc.root = convert(table, "", doc.lines);
    } catch (const toml::parse_error& e) {
      throw ConfigError(origin + ":" + std::to_string(e.source().begin.line) + ": " +
                        std::string(e.description()));
    }
  }
  if (!doc.root.is_object()) throw ConfigError(origin + ": top level must be a table");
  return doc;
}

ConfigDocument load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto format = path.extension() == ".json" ? ConfigFormat::json : ConfigFormat::toml;
  return load_config_string(ss.str(), format, path.string());
}

// ---------------------------------------------------------------------------

bool ConfigReader::has(const std::string& key) const {
  return node_->is_object() && node_->contains(key);
}

ConfigReader ConfigReader::child(const std::string& key) const {
  if (!has(key)) fail("missing key '" + key + "'");
  return {*doc_, node_->at(key), pointer_ + "/" + escape_token(key)};
}

ConfigReader ConfigReader::element(std::size_t index) const {
  if (!node_->is_array() || index >= node_->size()) fail("missing element " + std::to_string(index));
  return {*doc_, node_->at(index), pointer_ + "/" + std::to_string(index)};
}

double ConfigReader::number(const std::string& key) const {
  const auto c = child(key);
  if (!c.node().is_number()) c.fail("'" + key + "' must be a number");
  return c.node().get<double>();
}

double ConfigReader::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::uint64_t ConfigReader::integer(const std::string& key) const {
  const auto c = child(key);
  if (c.node().is_number_unsigned()) return c.node().get<std::uint64_t>();
  if (c.node().is_number_integer() && c.node().get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(c.node().get<std::int64_t>());
  c.fail("'" + key + "' must be a non-negative integer");
}

std::uint64_t ConfigReader::integer(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::string ConfigReader::string(const std::string& key) const {
  const auto c = child(key);
  if (!c.node().is_string()) c.fail("'" + key + "' must be a string");
  return c.node().get<std::string>();
}

std::string ConfigReader::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

bool ConfigReader::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto c = child(key);
  if (!c.node().is_boolean()) c.fail("'" + key + "' must be true or false");
  return c.node().get<bool>();
}

std::vector<double> ConfigReader::numbers(const std::string& key) const {
  const auto c = child(key);
  if (!c.node().is_array()) c.fail("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < c.node().size(); ++i) {
    const auto e = c.element(i);
    if (!e.node().is_number()) e.fail("expected a number");
    out.push_back(e.node().get<double>());
  }
  return out;
}

void ConfigReader::only(std::initializer_list<const char*> allowed) const {
  if (!node_->is_object()) fail("expected a table");
  for (const auto& [k, v] : node_->items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return k == a; });
    if (!known) child(k).fail("unknown key '" + k + "'");
  }
}

Budget read_budget(const ConfigReader& node, Budget base) {
  node.only({"realizations", "tuples", "mu_realizations", "mu_pairs", "bootstrap", "inner_m"});
  base.realizations = node.integer("realizations", base.realizations);
  base.tuples = node.integer("tuples", base.tuples);
  base.mu_realizations = node.integer("mu_realizations", base.mu_realizations);
  base.mu_pairs = node.integer("mu_pairs", base.mu_pairs);
  base.bootstrap = node.integer("bootstrap", base.bootstrap);
  base.inner_m = node.integer("inner_m", base.inner_m);
  try {
    base.validate();
  } catch (const std::exception& e) {
    node.fail(e.what());
  }
  return base;
}

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig parse_experiment(ConfigDocument document) {
  ExperimentConfig cfg;
  cfg.document = std::move(document);
  const ConfigDocument& doc = cfg.document;
  const ConfigReader root(doc, doc.root, "");
  root.only({"seed", "out_dir", "jobs", "epsilon", "z_threshold", "budget", "sources", "suites"});

  if (root.has("seed")) cfg.seed = root.integer("seed");
  cfg.out_dir = root.string("out_dir", cfg.out_dir);
  cfg.jobs = static_cast<unsigned>(std::max<std::uint64_t>(1, root.integer("jobs", 1)));
  cfg.defaults.epsilon = root.number("epsilon", cfg.defaults.epsilon);
  if (!(cfg.defaults.epsilon > 0.0)) root.child("epsilon").fail("epsilon must be positive");
  cfg.defaults.z_threshold = root.number("z_threshold", cfg.defaults.z_threshold);
  if (!(cfg.defaults.z_threshold > 0.0)) root.child("z_threshold").fail("z_threshold must be positive");
  if (root.has("budget")) cfg.defaults.budget = read_budget(root.child("budget"), cfg.defaults.budget);

  static const std::set<std::string> source_types{"cascade", "sk", "pspin", "enumerated", "dirac"};
  if (root.has("sources")) {
    const auto sources = root.child("sources");
    if (!sources.node().is_object()) sources.fail("'sources' must be a table of named sources");
    for (const auto& [name, value] : sources.node().items()) {
      const auto s = sources.child(name);
      SourceConfig sc;
      sc.name = name;
      sc.type = s.string("type");
      if (!source_types.count(sc.type))
        s.child("type").fail("unknown source type '" + sc.type +
                             "' (expected cascade, sk, pspin, enumerated or dirac)");
      sc.params = value;
      sc.pointer = s.pointer();
      cfg.sources.push_back(std::move(sc));
    }
  }

  static const std::set<std::string> suite_kinds{"gg",       "mixture",    "invariance", "theorem2",
                                                 "ultrametric", "extension", "barycenter"};
  std::set<std::string> names;
  if (root.has("suites")) {
    const auto suites = root.child("suites");
    if (!suites.node().is_array()) suites.fail("'suites' must be an array of tables");
    for (std::size_t i = 0; i < suites.node().size(); ++i) {
      const auto s = suites.element(i);
      if (!s.node().is_object()) s.fail("a suite must be a table");
      SuiteConfig sc;
      sc.kind = s.string("kind");
      if (!suite_kinds.count(sc.kind)) s.child("kind").fail("unknown suite kind '" + sc.kind + "'");
      sc.name = s.string("name", sc.kind + "-" + std::to_string(i + 1));
      if (!names.insert(sc.name).second) s.fail("duplicate suite name '" + sc.name + "'");
      if (sc.kind != "barycenter") {
        sc.source = s.string("source");
        const bool defined = std::any_of(cfg.sources.begin(), cfg.sources.end(),
                                         [&](const SourceConfig& src) { return src.name == sc.source; });
        if (!defined) s.child("source").fail("suite references undefined source '" + sc.source + "'");
      }
      sc.budget = s.has("budget") ? read_budget(s.child("budget"), cfg.defaults.budget)
                                  : cfg.defaults.budget;
      sc.params = s.node();
      sc.pointer = s.pointer();
      cfg.suites.push_back(std::move(sc));
    }
  }
  return cfg;
}

}  // namespace gglab
