#include "mib/metrics.hpp"

namespace mib {

MetricsWriter::MetricsWriter(const std::string& path, bool append) : path_(path) {
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  MIB_CHECK(out_.good(), "MetricsWriter: cannot open '" + path + "'");
}

void MetricsWriter::write_line(const std::string& json_line) {
  out_ << json_line << '\n';
  out_.flush();
}

std::vector<std::string> read_metric_lines(const std::string& path) {
  std::ifstream in(path);
  MIB_CHECK(in.good(), "read_metric_lines: cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace mib
