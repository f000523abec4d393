#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mib/common.hpp"

namespace mib {

inline constexpr int kMetricsSchemaVersion = 1;

// Append-only JSON-lines metrics log: one record per line, flushed on write.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false);
  void write_line(const std::string& json_line);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

std::vector<std::string> read_metric_lines(const std::string& path);

}  // namespace mib
