#include "adamtrack/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "adamtrack/harness.hpp"
#include "adamtrack/metrics.hpp"

namespace adamtrack {
namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec) {
  if (series.empty()) throw std::runtime_error("plot: no series");
  double tmin = INFINITY, tmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    if (s.t.empty()) throw std::runtime_error("plot: series '" + s.label + "' is empty");
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      tmin = std::min(tmin, s.t[i]);
      tmax = std::max(tmax, s.t[i]);
      const double e = s.sem.empty() ? 0.0 : s.sem[i];
      const double hi = s.mean[i] + e;
      const double lo = s.mean[i] - e;
      if (hi > 0 && std::isfinite(hi)) ymax = std::max(ymax, hi);
      if (s.mean[i] > 0 && std::isfinite(s.mean[i])) ymin = std::min(ymin, s.mean[i]);
      if (lo > 0 && std::isfinite(lo)) ymin = std::min(ymin, lo);
    }
  }
  if (!std::isfinite(ymin) || !std::isfinite(ymax)) {
    throw std::runtime_error("plot: no positive finite values for a log axis");
  }
  if (tmax == tmin) tmax = tmin + 1.0;
  double lo_dec = std::floor(std::log10(ymin));
  double hi_dec = std::ceil(std::log10(ymax));
  if (hi_dec == lo_dec) hi_dec = lo_dec + 1.0;

  const double left = 70, right = 150, top = 40, bottom = 50;
  const double w = spec.width - left - right;
  const double h = spec.height - top - bottom;
  auto px = [&](double t) { return left + (t - tmin) / (tmax - tmin) * w; };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, std::pow(10.0, lo_dec)));
    return top + (hi_dec - ly) / (hi_dec - lo_dec) * h;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(spec.width) + "\" height=\"" + std::to_string(spec.height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(left + w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(spec.title) + "</text>\n";
  // Axes and decade grid.
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double k = lo_dec; k <= hi_dec + 1e-9; k += 1.0) {
    const double y = py(std::pow(10.0, k));
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + w) +
           "\" y2=\"" + num(y) + "\" stroke=\"#dddddd\"/>\n";
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + 4) +
           "\" text-anchor=\"end\">1e" + std::to_string(static_cast<int>(k)) + "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double t = tmin + (tmax - tmin) * k / 4.0;
    const double x = px(t);
    out += "<line x1=\"" + num(x) + "\" y1=\"" + num(top + h) + "\" x2=\"" + num(x) +
           "\" y2=\"" + num(top + h + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(x) + "\" y=\"" + num(top + h + 18) +
           "\" text-anchor=\"middle\">" + format_number(std::round(t)) + "</text>\n";
  }
  out += "<text x=\"" + num(left + w / 2) + "\" y=\"" + num(spec.height - 10.0) +
         "\" text-anchor=\"middle\">" + escape(spec.xlabel) + "</text>\n";
  out += "<text transform=\"translate(16," + num(top + h / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + escape(spec.ylabel) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const bool band = !s.sem.empty() &&
                      std::any_of(s.sem.begin(), s.sem.end(), [](double e) { return e > 0; });
    if (band) {
      std::string d = "M";
      for (std::size_t i = 0; i < s.t.size(); ++i) {
        d += (i ? " L" : "") + num(px(s.t[i])) + "," + num(py(s.mean[i] + s.sem[i]));
      }
      for (std::size_t i = s.t.size(); i-- > 0;) {
        d += " L" + num(px(s.t[i])) + "," + num(py(s.mean[i] - s.sem[i]));
      }
      out += "<path class=\"band\" d=\"" + d + " Z\" fill=\"" + color +
             "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string d = "M";
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      d += (i ? " L" : "") + num(px(s.t[i])) + "," + num(py(s.mean[i]));
    }
    out += "<path class=\"curve\" d=\"" + d + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.8\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + num(left + w + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" +
           num(left + w + 36) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(left + w + 42) + "\" y=\"" + num(ly + 4) + "\">" +
           escape(s.label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::vector<Series> series_from_csvs(
    const std::vector<std::filesystem::path>& paths, const std::string& column) {
  if (paths.empty()) throw std::runtime_error("plot: no input files");
  std::map<std::string, std::vector<std::vector<StepMetrics>>> groups;
  for (const auto& p : paths) {
    auto rows = read_run_csv(p);
    if (rows.empty()) throw std::runtime_error(p.string() + ": no data rows");
    const std::string stem = p.stem().string();
    const auto cut = stem.find("_lr");
    groups[cut == std::string::npos ? stem : stem.substr(0, cut)].push_back(
        std::move(rows));
  }
  std::vector<Series> out;
  for (auto& [label, runs] : groups) {
    Series s;
    s.label = label;
    std::vector<std::vector<double>> values;
    for (const auto& rows : runs) {
      if (rows.size() != runs.front().size()) {
        throw std::runtime_error("plot: runs of '" + label + "' differ in length");
      }
      std::vector<double> v;
      for (const auto& r : rows) v.push_back(column_value(r, column));
      values.push_back(std::move(v));
    }
    for (const auto& r : runs.front()) s.t.push_back(static_cast<double>(r.t));
    mean_and_sem(values, s.mean, s.sem);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace adamtrack
