#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "agesir/model.hpp"
#include "agesir/network.hpp"

namespace agesir {

/// Full-precision decimal rendering (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Writes `t,s_1,beta_1,r_1,...,s_m,beta_m,r_m` rows at full precision.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const int m = traj.states.empty() ? 0 : traj.states.front().groups();
  out << 't';
  for (int i = 1; i <= m; ++i)
    out << ",s_" << i << ",beta_" << i << ",r_" << i;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.times[k]);
    const GroupFractions& f = traj.states[k];
    for (int i = 0; i < m; ++i)
      out << ',' << format_double(f.s[i]) << ',' << format_double(f.beta[i]) << ','
          << format_double(f.r[i]);
    out << '\n';
  }
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  write_trajectory_csv(traj, out);
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty file '" + path + "'");
  int cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  if (cols < 4 || (cols - 1) % 3 != 0)
    throw std::invalid_argument("line 1: expected header t,s_1,beta_1,r_1,...");
  const int m = (cols - 1) / 3;

  Trajectory traj;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(row, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": malformed number '" +
                                    cell + "'");
      }
    }
    if (static_cast<int>(values.size()) != cols)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": missing column");
    GroupFractions f;
    f.s.resize(m);
    f.beta.resize(m);
    f.r.resize(m);
    for (int i = 0; i < m; ++i) {
      f.s[i] = values[1 + 3 * i];
      f.beta[i] = values[2 + 3 * i];
      f.r[i] = values[3 + 3 * i];
    }
    traj.times.push_back(values[0]);
    traj.states.push_back(std::move(f));
  }
  if (traj.times.empty()) throw std::invalid_argument("no data rows in '" + path + "'");
  return traj;
}

/// Writes `t,kind,node_or_pair,detail` rows.
inline void write_event_log_csv(const EventLog& log, std::ostream& out) {
  out << "t,kind,node_or_pair,detail\n";
  for (const EventRecord& ev : log) {
    out << format_double(ev.time) << ',';
    switch (ev.kind) {
      case EventRecord::Kind::infection:
        out << "infection," << ev.node_a << ",";
        break;
      case EventRecord::Kind::recovery:
        out << "recovery," << ev.node_a << ",";
        break;
      case EventRecord::Kind::edge_update:
        out << "edge_update," << ev.node_a << '-' << ev.node_b << ',' << ev.new_state;
        break;
    }
    out << '\n';
  }
}

inline void write_event_log_csv(const EventLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  write_event_log_csv(log, out);
}

}  // namespace agesir
