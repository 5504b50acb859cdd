#pragma once

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "ecgxai/signal.hpp"

namespace ecgxai {

using json = nlohmann::json;

// Row-major nested arrays.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const char* field);

json case_to_json(const Case& c);
Case case_from_json(const json& j);

// NDJSON, one case per line. Blank lines are skipped on load.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// Reads a whole file; throws IoError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ecgxai
