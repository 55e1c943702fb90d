#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cli {

// Written alongside every command's outputs. Output paths are stored
// relative to the manifest's directory, so replaying into a fresh directory
// reproduces every file byte for byte, manifest included.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::ordered_json parameters;
  std::vector<std::string> outputs;
};

// Appends manifest.json to manifest.outputs and writes it under outdir.
void write_manifest(const std::string& outdir, RunManifest manifest);

RunManifest load_manifest(const std::string& path);

}  // namespace cli
