#include "manifest.hpp"

#include <fstream>

#include "bbp.h"
#include "common.hpp"
#include "svg.hpp"

namespace cli {

void write_manifest(const std::string& outdir, RunManifest manifest) {
  manifest.outputs.push_back("manifest.json");
  nlohmann::ordered_json doc;
  doc["command"] = manifest.command;
  doc["version"] = bbp_version();
  doc["seed"] = manifest.seed;
  doc["parameters"] = manifest.parameters;
  doc["outputs"] = manifest.outputs;
  write_file(outdir + "/manifest.json", doc.dump(2) + "\n");
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_failure("cannot open manifest " + path);
  nlohmann::ordered_json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw io_failure("malformed manifest " + path + ": " + e.what());
  }
  RunManifest manifest;
  try {
    manifest.command = doc.at("command").get<std::string>();
    manifest.seed = doc.at("seed").get<std::uint64_t>();
    manifest.parameters = doc.at("parameters");
    manifest.outputs = doc.at("outputs").get<std::vector<std::string>>();
    const auto version = doc.at("version").get<std::string>();
    if (version != bbp_version()) {
      throw io_failure("manifest " + path + " was written by version " +
                       version + ", this tool is " + bbp_version());
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_failure("manifest " + path + " is missing fields: " + e.what());
  }
  return manifest;
}

}  // namespace cli
