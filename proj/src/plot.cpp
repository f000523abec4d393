#include "mib/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "mib/common.hpp"
#include "mib/metrics.hpp"

namespace mib {

using nlohmann::json;

void plot_metrics(const std::string& log_path, const std::string& out_path) {
  std::vector<double> steps, means, stds;
  for (const std::string& line : read_metric_lines(log_path)) {
    json j = json::parse(line);
    if (j.value("type", "") != "eval") continue;
    steps.push_back(j.at("step").get<double>());
    means.push_back(j.at("return_mean").get<double>());
    stds.push_back(j.value("return_std", 0.0));
  }
  MIB_CHECK(!steps.empty(), "plot: no eval records in '" + log_path + "'");

  const double W = 720, H = 440, ml = 70, mr = 20, mt = 30, mb = 50;
  double x0 = *std::min_element(steps.begin(), steps.end());
  double x1 = *std::max_element(steps.begin(), steps.end());
  double y0 = means[0], y1 = means[0];
  for (std::size_t i = 0; i < means.size(); ++i) {
    y0 = std::min(y0, means[i] - stds[i]);
    y1 = std::max(y1, means[i] + stds[i]);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 1;
    y1 += 1;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

  std::ofstream out(out_path, std::ios::trunc);
  MIB_CHECK(out.good(), "plot: cannot open '" + out_path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    const double yv = y0 + (y1 - y0) * i / 5.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << static_cast<long>(xv) << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << std::round(yv * 10) / 10 << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << py(yv) << "\" x2=\"" << W - mr << "\" y2=\""
        << py(yv) << "\" stroke=\"#dddddd\"/>\n";
  }
  // +- std band
  out << "<polygon fill=\"#aecbe8\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < steps.size(); ++i)
    out << px(steps[i]) << "," << py(means[i] + stds[i]) << " ";
  for (std::size_t i = steps.size(); i-- > 0;)
    out << px(steps[i]) << "," << py(means[i] - stds[i]) << " ";
  out << "\"/>\n";
  // mean curve
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < steps.size(); ++i) out << px(steps[i]) << "," << py(means[i]) << " ";
  out << "\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">environment steps</text>\n";
  out << "<text x=\"16\" y=\"" << H / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << H / 2
      << ")\">episode return</text>\n";
  out << "</svg>\n";
}

}  // namespace mib
