#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "ranklab/errors.hpp"
#include "ranklab/io.hpp"

namespace ranklab::manifest {

namespace fs = std::filesystem;

/// SHA-1 of "blob <size>\0<content>", i.e. the id git gives the file.
inline std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw IoError("cannot allocate hash context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("hashing failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

/// Hashes of a file, or of every regular file directly inside a directory
/// (manifest.json excluded), keyed by path.
inline std::map<std::string, std::string> hash_inputs(const fs::path& path) {
  std::map<std::string, std::string> out;
  if (fs::is_regular_file(path)) {
    out[path.generic_string()] = git_blob_hash(io::read_text_file(path));
  } else if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
        out[entry.path().generic_string()] = git_blob_hash(io::read_text_file(entry.path()));
  } else {
    throw IoError("input '" + path.string() + "' does not exist");
  }
  return out;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::string output;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;
  std::string timestamp;

  void add_input(const fs::path& p) {
    inputs.push_back(p.generic_string());
    for (auto& [k, v] : hash_inputs(p)) input_hashes[k] = v;
  }

  nlohmann::json to_json() const {
    return {{"command", command},
            {"arguments", arguments},
            {"config_path", config_path ? nlohmann::json(*config_path) : nlohmann::json(nullptr)},
            {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
            {"inputs", inputs},
            {"input_hashes", input_hashes},
            {"output", output},
            {"outputs", outputs},
            {"timestamp", timestamp}};
  }

  void write(const fs::path& dir) {
    timestamp = format_timestamp(Timestamp{std::chrono::duration_cast<std::chrono::seconds>(
                                               std::chrono::system_clock::now().time_since_epoch())
                                               .count()});
    io::write_text_file(dir / "manifest.json", to_json().dump(2) + "\n");
  }
};

}  // namespace ranklab::manifest
