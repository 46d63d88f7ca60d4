#pragma once

// CSV and JSON artifacts. Numbers are written with 17 significant digits so
// that repeated runs produce identical files.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace finlat::cli {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header);
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(std::initializer_list<double> values);
  void row(std::span<const double> values);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Creates the directory (and parents); throws IoError.
void ensure_directory(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

}  // namespace finlat::cli
