#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "htc/models.hpp"

namespace htc {

struct Provenance {
  std::string topic = "flat";           // topic id, or "flat"
  std::optional<std::string> parent;    // set iff initialized from a parent topic
  int epoch = 0;                        // epoch of the returned (best-dev) state
  double dev_metric = 0;                // monitored dev F1 in [0, 1]
  double pos_weight = 1.0;

  nlohmann::json to_json() const;
  static Provenance from_json(const nlohmann::json& doc);
  bool operator==(const Provenance&) const = default;
};

struct Checkpoint {
  ModelSpec spec;
  ParameterSet params;
  Provenance provenance;

  Model model() const { return Model(spec, params); }
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Archive layout: "HTCK", u32 version, u64 header length, JSON header
// (spec, provenance, tensor table), then every tensor's values as
// little-endian doubles in column-major order. Written atomically.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Throws CheckpointError on a malformed archive or, when expected_vocab_hash
// is given, on a vocabulary mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

// Topic ids become file names: bytes outside [A-Za-z0-9._-] are %XX-escaped.
std::string checkpoint_file_name(const std::string& topic);

}  // namespace htc
