#include "phonon_herald/shot_io.hpp"

#include <charconv>
#include <fstream>

#include <json.hpp>

namespace herald {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

std::string render_shot_header(const ShotFileHeader& header) {
  std::string out;
  out += "{\"format\":\"";
  out += kShotFormatId;
  out += "\",\"config_hash\":\"";
  out += header.config_hash;
  out += "\",\"seed\":";
  out += std::to_string(header.seed);
  out += "}\n";
  return out;
}

std::string render_shot_record(const ShotRecord& record) {
  std::string out;
  out.reserve(24 + 8 * record.timestamps_us.size());
  out += "{\"shot\":";
  out += std::to_string(record.shot_index);
  out += ",\"ts\":[";
  for (std::size_t i = 0; i < record.timestamps_us.size(); ++i) {
    if (i) out += ',';
    out += format_double(record.timestamps_us[i]);
  }
  out += "]}\n";
  return out;
}

ShotFile read_shot_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ShotFile file;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      throw ShotFileError("empty line", line_no);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ShotFileError(std::string("JSON parse error: ") + e.what(), line_no);
    }
    if (line_no == 1) {
      if (!j.contains("format") || !j["format"].is_string()) {
        throw ShotFileError("header missing format field", line_no);
      }
      if (j["format"].get<std::string>() != kShotFormatId) {
        throw ShotFileError("unsupported format '" + j["format"].get<std::string>() +
                                "', expected '" + std::string(kShotFormatId) + "'",
                            line_no);
      }
      if (!j.contains("config_hash") || !j.contains("seed")) {
        throw ShotFileError("header missing config_hash or seed", line_no);
      }
      file.header.config_hash = j["config_hash"].get<std::string>();
      file.header.seed = j["seed"].get<std::uint64_t>();
      continue;
    }
    if (!j.contains("shot") || !j.contains("ts") || !j["ts"].is_array()) {
      throw ShotFileError("record missing shot or ts fields", line_no);
    }
    ShotRecord rec;
    rec.shot_index = j["shot"].get<long>();
    rec.timestamps_us.reserve(j["ts"].size());
    double prev = -1.0;
    for (const auto& t : j["ts"]) {
      if (!t.is_number()) throw ShotFileError("non-numeric timestamp", line_no);
      const double v = t.get<double>();
      if (v < prev) throw ShotFileError("timestamps not sorted", line_no);
      rec.timestamps_us.push_back(v);
      prev = v;
    }
    file.shots.push_back(std::move(rec));
  }
  if (line_no == 0) throw ShotFileError("empty file", 1);
  return file;
}

}  // namespace herald
