#include "echem/drive_cycle.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "echem/errors.hpp"

namespace echem {

double DriveCycle::interval(std::size_t k) const {
  if (samples.size() < 2) return 0.0;
  if (k + 1 < samples.size()) return samples[k + 1].t - samples[k].t;
  return samples[k].t - samples[k - 1].t;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool to_double(const std::string& s, double& v) {
  if (s == "nan" || s == "NaN" || s == "inf" || s == "-inf" || s == "Inf" || s == "-Inf") {
    v = std::strtod(s.c_str(), nullptr);
    return true;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

DriveCycle load_drive_cycle(const std::filesystem::path& path, double max_abs_current) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open drive cycle " + path.string());
  DriveCycle cycle;
  cycle.name = path.stem().string();
  const std::string src = path.string();
  int col_t = -1, col_i = -1, col_T = -1, col_v = -1;
  std::size_t ncols = 0;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      if (cycle.source.empty()) {
        const auto b = line.find_first_not_of(" \t#");
        cycle.source = b == std::string::npos ? "" : line.substr(b);
      }
      continue;
    }
    const auto cells = split_csv(line);
    if (!header) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == "t_s") col_t = static_cast<int>(c);
        else if (cells[c] == "current_A") col_i = static_cast<int>(c);
        else if (cells[c] == "temperature_K") col_T = static_cast<int>(c);
        else if (cells[c] == "voltage_V") col_v = static_cast<int>(c);
        else throw ParseError(src + ": unknown column '" + cells[c] + "'", n);
      }
      if (col_t < 0 || col_i < 0 || col_T < 0)
        throw ParseError(src + ": header must name t_s, current_A and temperature_K", n);
      ncols = cells.size();
      header = true;
      continue;
    }
    if (cells.size() != ncols) {
      std::ostringstream s;
      s << src << ": expected " << ncols << " fields, found " << cells.size();
      throw ParseError(s.str(), n);
    }
    double vals[4] = {0, 0, 0, std::numeric_limits<double>::quiet_NaN()};
    const int cols[4] = {col_t, col_i, col_T, col_v};
    for (int k = 0; k < 4; ++k) {
      if (cols[k] < 0) continue;
      if (!to_double(cells[cols[k]], vals[k]))
        throw ParseError(src + ": malformed number '" + cells[cols[k]] + "'", n);
      if (!std::isfinite(vals[k])) throw NonFiniteValueError(src + ": non-finite value", n);
    }
    if (!cycle.samples.empty() && !(vals[0] > cycle.samples.back().t))
      throw NonMonotoneTimeError(src + ": time must increase strictly", n);
    if (std::abs(vals[1]) > max_abs_current) {
      std::ostringstream s;
      s << src << ": |current| " << std::abs(vals[1]) << " A exceeds plausibility bound "
        << max_abs_current << " A";
      throw ParseError(s.str(), n);
    }
    if (!(vals[2] > 0.0)) throw ParseError(src + ": temperature must be positive", n);
    cycle.samples.push_back({vals[0], vals[1], vals[2], vals[3]});
  }
  if (!header) throw ParseError(src + ": missing header", 0);
  if (cycle.samples.empty()) throw ParseError(src + ": no samples", 0);
  return cycle;
}

void write_drive_cycle(const std::filesystem::path& path, const DriveCycle& cycle) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  if (!cycle.source.empty()) out << "# " << cycle.source << '\n';
  out << "t_s,current_A,temperature_K" << (cycle.has_voltage() ? ",voltage_V" : "") << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);  // lossless round trip
  for (const auto& s : cycle.samples) {
    out << s.t << ',' << s.I << ',' << s.T;
    if (cycle.has_voltage()) out << ',' << s.V;
    out << '\n';
  }
}

DriveCycle constant_current_cycle(double I, double duration, double dt, double T,
                                  const std::string& name) {
  DriveCycle c;
  c.name = name;
  c.source = "generated constant current";
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  for (std::size_t k = 0; k <= n; ++k) c.samples.push_back({k * dt, I, T});
  return c;
}

DriveCycle append_cycle(const DriveCycle& a, const DriveCycle& b) {
  DriveCycle out = a;
  out.name = a.name + "+" + b.name;
  if (a.samples.empty()) return b;
  const double shift = a.samples.back().t + a.interval(a.size() - 1) - b.samples.front().t;
  for (auto s : b.samples) {
    s.t += shift;
    out.samples.push_back(s);
  }
  return out;
}

}  // namespace echem
