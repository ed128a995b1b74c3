// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "hbvla/tools/bench.hpp"

namespace hbvla::tools {

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

const char* color(Method m) {
  switch (m) {
    case Method::plain_sign: return "#9e9e9e";
    case Method::haar_noperm: return "#4f81bd";
    case Method::hbvla: return "#c0504d";
  }
  return "#000000";
}

template <typename Get>
void bar_chart(const std::filesystem::path& file, const std::string& title,
               const std::vector<BenchRow>& rows, Get get) {
  std::vector<std::string> cases;
  std::vector<Method> methods;
  std::map<std::pair<std::string, int>, double> values;
  double vmax = 0.0;
  for (const auto& r : rows) {
    const auto v = get(r);
    if (!v) continue;
    if (std::find(cases.begin(), cases.end(), r.case_name) == cases.end()) cases.push_back(r.case_name);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    values[{r.case_name, static_cast<int>(r.method)}] = *v;
    vmax = std::max(vmax, *v);
  }
  if (cases.empty()) return;
  std::sort(methods.begin(), methods.end());
  if (vmax <= 0.0) vmax = 1.0;

  const double bar = 18.0, gap = 14.0, left = 70.0, top = 40.0, plot_h = 220.0;
  const double group_w = bar * static_cast<double>(methods.size()) + gap;
  const double width = left + group_w * static_cast<double>(cases.size()) + 160.0;
  const double height = top + plot_h + 90.0;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
    << left + group_w * static_cast<double>(cases.size()) << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">"
    << format_double(vmax).substr(0, 8) << "</text>\n";
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const double x0 = left + group_w * static_cast<double>(ci) + gap / 2;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const auto it = values.find({cases[ci], static_cast<int>(methods[mi])});
      if (it == values.end()) continue;
      const double h = plot_h * it->second / vmax;
      s << "<rect x=\"" << x0 + bar * static_cast<double>(mi) << "\" y=\"" << top + plot_h - h
        << "\" width=\"" << bar - 2 << "\" height=\"" << h << "\" fill=\"" << color(methods[mi])
        << "\"><title>" << escape_xml(cases[ci]) << " " << to_string(methods[mi]) << ": "
        << format_double(it->second) << "</title></rect>\n";
    }
    s << "<text x=\"" << x0 << "\" y=\"" << top + plot_h + 14 << "\" transform=\"rotate(30 " << x0
      << ' ' << top + plot_h + 14 << ")\">" << escape_xml(cases[ci]) << "</text>\n";
  }
  const double lx = left + group_w * static_cast<double>(cases.size()) + 20;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const double ly = top + 16.0 * static_cast<double>(mi);
    s << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
      << color(methods[mi]) << "\"/>\n";
    s << "<text x=\"" << lx + 14 << "\" y=\"" << ly + 9 << "\">" << to_string(methods[mi]) << "</text>\n";
  }
  s << "</svg>\n";

  std::ofstream f(file);
  if (!f) fail(ErrorCode::io, "cannot write " + file.string());
  f << s.str();
}

}  // namespace

void write_svg(const std::filesystem::path& dir, const std::vector<BenchRow>& rows) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  bar_chart(dir / "fro_error.svg", "Frobenius error", rows,
            [](const BenchRow& r) { return std::optional<double>(r.fro_error); });
  bar_chart(dir / "proxy_error.svg", "Output proxy error", rows,
            [](const BenchRow& r) { return r.proxy_error; });
  bar_chart(dir / "avg_bits.svg", "Bits per weight", rows,
            [](const BenchRow& r) { return std::optional<double>(r.avg_bits); });
}

}  // namespace hbvla::tools
