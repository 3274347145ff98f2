#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace herald {

/// One experimental shot: index plus sorted detection times in
/// microseconds relative to the shot start.
struct ShotRecord {
  long shot_index = 0;
  std::vector<double> timestamps_us;
};

/// Shortest decimal representation that round-trips the double exactly
/// (std::to_chars). Every file format uses this rule.
std::string format_double(double v);

/// FNV-1a 64-bit, used for config and input-file provenance hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t v);

/// Hash of a file's raw bytes. Throws on I/O failure.
std::uint64_t hash_file(const std::filesystem::path& path);

inline constexpr std::string_view kShotFormatId = "phonon-herald/shots/v1";

/// Header line of a shot file.
struct ShotFileHeader {
  std::string config_hash;  ///< 16 hex chars
  std::uint64_t seed = 0;
};

std::string render_shot_header(const ShotFileHeader& header);
/// One `{"shot":N,"ts":[...]}` line including the trailing newline.
std::string render_shot_record(const ShotRecord& record);

struct ShotFile {
  ShotFileHeader header;
  std::vector<ShotRecord> shots;
};

class ShotFileError : public std::runtime_error {
 public:
  ShotFileError(const std::string& msg, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line(line) {}
  long line;
};

/// Reads and validates a complete shot file. Throws ShotFileError naming
/// the first offending line (bad JSON, missing fields, wrong format id).
ShotFile read_shot_file(const std::filesystem::path& path);

}  // namespace herald
