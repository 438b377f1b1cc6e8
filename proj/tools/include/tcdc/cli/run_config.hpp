#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tcdc/datapipe.hpp"
#include "tcdc/net.hpp"
#include "tcdc/trainer.hpp"

namespace tcdc::cli {

enum class ValueKind { Integer, Real, Boolean, Text, RealList };

struct KeyInfo {
  std::string_view key;
  std::string_view fallback;
  ValueKind kind;
};

/// Every key a run understands, with its default.
const std::vector<KeyInfo>& known_keys();

/// Typed key=value configuration. Values are validated when set, so a fully
/// merged RunConfig never fails to convert later.
class RunConfig {
 public:
  RunConfig();

  /// Throws ConfigError for unknown keys or values of the wrong type.
  void set(const std::string& key, const std::string& value);
  /// `key=value` lines; blank lines and `#` comments are skipped.
  void merge_text(std::string_view text, std::string_view origin = "config");
  void merge_file(const std::filesystem::path& path);

  const std::string& text(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;

  /// Sorted `key=value` lines for every key except `out`.
  std::string echo() const;

  TrainConfig train_config() const;
  PrepareConfig prepare_config() const;
  SynthSpec synth_spec() const;
  StreamKind stream() const;
  NetConfig net_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tcdc::cli
