#pragma once

// Experiment configuration. TOML or JSON documents are loaded into one JSON
// tree; for TOML every node keeps its source line so validation errors can
// point at it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gglab/report.hpp"

namespace gglab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigDocument {
  std::string origin;  // file name used in messages
  nlohmann::json root;
  std::map<std::string, int> lines;  // JSON pointer -> 1-based source line
  std::string text;                  // raw bytes, hashed into the manifest

  /// Line of the node at `pointer` or of its nearest ancestor with one.
  std::optional<int> line_of(const std::string& pointer) const;
  /// "origin:line: message (at pointer)".
  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const;
};

enum class ConfigFormat { toml, json };

/// Format follows the extension (.json means JSON, anything else TOML).
ConfigDocument load_config_file(const std::filesystem::path& path);
ConfigDocument load_config_string(const std::string& text, ConfigFormat format,
                                  const std::string& origin = "<config>");

/// Defaults shared by every suite unless overridden.
struct ConfigDefaults {
  double epsilon = 0.02;
  double z_threshold = 3.0;
  Budget budget{};
};

struct SourceConfig {
  std::string name;
  std::string type;  // cascade | sk | pspin | enumerated | dirac
  nlohmann::json params;
  std::string pointer;
};

struct SuiteConfig {
  std::string name;
  std::string kind;  // gg | mixture | invariance | theorem2 | ultrametric | extension | barycenter
  std::string source;
  nlohmann::json params;
  Budget budget;
  std::string pointer;
};

struct ExperimentConfig {
  ConfigDocument document;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "gglab-out";
  unsigned jobs = 1;
  ConfigDefaults defaults;
  std::vector<SourceConfig> sources;
  std::vector<SuiteConfig> suites;
};

/// Structural validation: known keys and kinds, unique names, every suite
/// referencing a defined source. Suite parameters are checked when the runner
/// prepares the suite.
ExperimentConfig parse_experiment(ConfigDocument document);

/// Typed lookups that report failures against the document.
class ConfigReader {
 public:
  ConfigReader(const ConfigDocument& doc, const nlohmann::json& node, std::string pointer)
      : doc_(&doc), node_(&node), pointer_(std::move(pointer)) {}

  const nlohmann::json& node() const noexcept { return *node_; }
  const std::string& pointer() const noexcept { return pointer_; }
  bool has(const std::string& key) const;
  ConfigReader child(const std::string& key) const;
  ConfigReader element(std::size_t index) const;

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::uint64_t integer(const std::string& key) const;
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;

  /// Converts the child with nlohmann's from_json, reporting exceptions at it.
  template <class T>
  T get(const std::string& key) const {
    const auto c = child(key);
    try {
      return c.node().template get<T>();
    } catch (const std::exception& e) {
      c.fail(e.what());
    }
  }

  [[noreturn]] void fail(const std::string& message) const { doc_->fail(pointer_, message); }
  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const;

 private:
  const ConfigDocument* doc_;
  const nlohmann::json* node_;
  std::string pointer_;
};

Budget read_budget(const ConfigReader& node, Budget base);

/// FNV-1a 64 of the bytes.
std::uint64_t fnv1a64(const std::string& bytes) noexcept;

}  // namespace gglab
