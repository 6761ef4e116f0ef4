#include <maipp/plot.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace maipp {

namespace {

constexpr double kSize = 400.0;
constexpr double kMargin = 40.0;
constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

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

// Data coordinates in [x0,x1] x [y0,y1] mapped onto the plot square, y up.
struct Frame {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * kSize; }
  double py(double y) const { return kMargin + kSize - (y - y0) / (y1 - y0) * kSize; }
};

void open_svg(std::ostream& os, const std::string& title) {
  const double full = kSize + 2 * kMargin;
  os << std::fixed << std::setprecision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << full << "\" height=\"" << full << "\" viewBox=\"0 0 "
     << full << ' ' << full << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    os << "<text x=\"" << full / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
       << "</text>\n";
}

void axes(std::ostream& os, const Frame& f) {
  os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
     << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize << "\" height=\"" << kSize
     << "\"/>\n</g>\n<g font-size=\"10\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double tx = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double ty = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << f.px(tx) << "\" y=\"" << kMargin + kSize + 14 << "\" text-anchor=\"middle\">"
       << std::setprecision(3) << std::defaultfloat << tx << std::fixed << std::setprecision(2) << "</text>\n";
    os << "<text x=\"" << kMargin - 4 << "\" y=\"" << f.py(ty) + 3 << "\" text-anchor=\"end\">" << std::setprecision(3)
       << std::defaultfloat << ty << std::fixed << std::setprecision(2) << "</text>\n";
  }
  os << "</g>\n";
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double number(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw std::invalid_argument(std::string(what) + ": not a number '" + s + "'");
  }
}

}  // namespace

std::string svg_trajectories(const std::vector<Polyline>& agents, const std::string& title) {
  std::ostringstream os;
  open_svg(os, title);
  const Frame f;
  axes(os, f);
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const auto& path = agents[a];
    if (path.empty()) continue;
    const char* color = kPalette[a % kPalette.size()];
    os << "<polyline class=\"agent\" fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
    for (const auto& p : path) os << f.px(p.x()) << ',' << f.py(p.y()) << ' ';
    os << "\"/>\n<circle cx=\"" << f.px(path.front().x()) << "\" cy=\"" << f.py(path.front().y())
       << "\" r=\"4\" fill=\"" << color << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const Eigen::VectorXd& values, int resolution, const std::string& title) {
  if (resolution < 1 || values.size() != static_cast<Eigen::Index>(resolution) * resolution)
    throw std::invalid_argument("svg_heatmap: value count does not match resolution");
  std::ostringstream os;
  open_svg(os, title);
  const Frame f;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  const double cell = kSize / resolution;
  os << "<g class=\"heatmap\" shape-rendering=\"crispEdges\">\n";
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      const double t = (values(r * resolution + c) - lo) / span;
      const int red = static_cast<int>(std::lround(230 * t + 25 * (1 - t)));
      const int gb = static_cast<int>(std::lround(40 * t + 235 * (1 - t)));
      os << "<rect class=\"cell\" x=\"" << kMargin + c * cell << "\" y=\"" << kMargin + kSize - (r + 1) * cell
         << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << red << ',' << gb << ',' << gb
         << ")\"/>\n";
    }
  }
  os << "</g>\n";
  axes(os, f);
  os << "</svg>\n";
  return os.str();
}

std::string svg_trace_curve(const std::vector<std::pair<double, double>>& curve, const std::string& title) {
  std::ostringstream os;
  open_svg(os, title);
  Frame f;
  if (!curve.empty()) {
    f.x1 = 0.0;
    f.y1 = 0.0;
    for (const auto& [x, y] : curve) {
      f.x1 = std::max(f.x1, x);
      f.y1 = std::max(f.y1, y);
    }
    if (f.x1 <= 0) f.x1 = 1.0;
    if (f.y1 <= 0) f.y1 = 1.0;
  }
  axes(os, f);
  if (!curve.empty()) {
    os << "<polyline class=\"trace\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : curve) os << f.px(x) << ',' << f.py(y) << ' ';
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<Polyline> read_trajectories_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "agent,index,x,y")
    throw std::invalid_argument("trajectories csv: expected header agent,index,x,y");
  std::vector<Polyline> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = fields(line);
    if (f.size() != 4) throw std::invalid_argument("trajectories csv: expected 4 fields in '" + line + "'");
    const double a = number(f[0], "trajectories csv");
    if (a < 0 || a != std::floor(a)) throw std::invalid_argument("trajectories csv: bad agent id");
    const auto id = static_cast<std::size_t>(a);
    if (out.size() <= id) out.resize(id + 1);
    out[id].emplace_back(number(f[2], "trajectories csv"), number(f[3], "trajectories csv"));
  }
  return out;
}

Eigen::VectorXd read_grid_csv(std::istream& is, int& resolution) {
  std::vector<double> vals;
  std::string line;
  int rows = 0;
  std::size_t cols = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = fields(line);
    if (rows == 0) cols = f.size();
    if (f.size() != cols) throw std::invalid_argument("grid csv: ragged rows");
    for (const auto& c : f) vals.push_back(number(c, "grid csv"));
    ++rows;
  }
  if (rows == 0 || static_cast<std::size_t>(rows) != cols) throw std::invalid_argument("grid csv: expected a square grid");
  resolution = rows;
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

std::vector<std::pair<double, double>> read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "distance,trace")
    throw std::invalid_argument("trace curve csv: expected header distance,trace");
  std::vector<std::pair<double, double>> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = fields(line);
    if (f.size() != 2) throw std::invalid_argument("trace curve csv: expected 2 fields");
    out.emplace_back(number(f[0], "trace curve csv"), number(f[1], "trace curve csv"));
  }
  return out;
}

void write_curve_csv(std::ostream& os, const std::vector<std::pair<double, double>>& curve) {
  os << "distance,trace\n" << std::setprecision(12);
  for (const auto& [d, t] : curve) os << d << ',' << t << '\n';
}

}  // namespace maipp
