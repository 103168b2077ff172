#include "provmind/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "provmind/common.hpp"

namespace provmind {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::io_error, "short write to " + path);
}

JsonlFile read_jsonl(const std::string& path, std::string_view expected_format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  JsonlFile file;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::io_error, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("format")) {
        throw Error(ErrorCode::io_error, path + ": missing header line");
      }
      if (!expected_format.empty() && j["format"] != expected_format) {
        throw Error(ErrorCode::io_error, path + ": expected format " + std::string(expected_format) +
                                             ", found " + j["format"].dump());
      }
      file.header = std::move(j);
      have_header = true;
      continue;
    }
    file.records.push_back(std::move(j));
  }
  if (!have_header) throw Error(ErrorCode::io_error, path + ": empty file");
  return file;
}

void write_jsonl(const std::string& path, const nlohmann::json& header,
                 const std::vector<nlohmann::json>& records) {
  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& r : records) {
    out += r.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

nlohmann::json artifact_header(std::string_view format, int version, const nlohmann::json& extra) {
  nlohmann::json h = extra.is_object() ? extra : nlohmann::json::object();
  h["format"] = format;
  h["version"] = version;
  h["tool_version"] = kToolVersion;
  return h;
}

}  // namespace provmind
