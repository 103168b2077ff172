#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace provmind {

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Newline-delimited file whose first line is a header object carrying
/// "format" and "version".
struct JsonlFile {
  nlohmann::json header;
  std::vector<nlohmann::json> records;
};

/// Throws Error{io_error} if the file is missing or its header format differs
/// from `expected_format` (an empty expectation accepts any header).
JsonlFile read_jsonl(const std::string& path, std::string_view expected_format = {});
void write_jsonl(const std::string& path, const nlohmann::json& header,
                 const std::vector<nlohmann::json>& records);

/// Standard header fields stamped on every artifact.
nlohmann::json artifact_header(std::string_view format, int version, const nlohmann::json& extra);

}  // namespace provmind
