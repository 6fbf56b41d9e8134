#include "branchinfer/trajectory_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace branchinfer::io {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IoError("not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_episode_csv(std::ostream& os, const Episode& episode) {
  const auto& p = episode.profile;
  const auto& t = episode.trajectory;
  if (t.samples() != p.samples()) throw IoError("trajectory and force profile lengths differ");
  os << "t,force_z,pos_x,pos_z,vel_x,vel_z\n";
  for (std::size_t i = 0; i < p.samples(); ++i) {
    os << format_double(static_cast<double>(i + 1) * p.dt_obs) << ',' << format_double(p.forces[i])
       << ',' << format_double(t.pos[i].x) << ',' << format_double(t.pos[i].z) << ','
       << format_double(t.vel[i].x) << ',' << format_double(t.vel[i].z) << '\n';
  }
}

void write_episode_csv(const std::filesystem::path& path, const Episode& episode) {
  std::ostringstream os;
  write_episode_csv(os, episode);
  write_text(path, os.str());
}

Episode read_episode_csv(std::istream& is, double grasp_fraction) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty episode file");
  const auto header = split_line(line);
  const std::vector<std::string> expected{"t", "force_z", "pos_x", "pos_z", "vel_x", "vel_z"};
  if (header != expected) throw IoError("unexpected episode header: " + line);

  Episode ep;
  ep.profile.grasp_fraction = grasp_fraction;
  std::vector<double> times;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != 6) throw IoError("episode row must have 6 columns: " + line);
    times.push_back(parse_double(cells[0]));
    ep.profile.forces.push_back(parse_double(cells[1]));
    ep.trajectory.pos.push_back({parse_double(cells[2]), parse_double(cells[3])});
    ep.trajectory.vel.push_back({parse_double(cells[4]), parse_double(cells[5])});
  }
  if (times.size() < 2) throw IoError("episode needs at least 2 samples");
  // t_i = (i + 1) dt_obs, so the first sample carries dt_obs exactly.
  ep.profile.dt_obs = times.front();
  ep.trajectory.dt_obs = ep.profile.dt_obs;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double expected_t = static_cast<double>(i + 1) * ep.profile.dt_obs;
    if (std::abs(times[i] - expected_t) > 1e-9 * expected_t) {
      throw IoError("episode samples are not uniformly spaced");
    }
  }
  return ep;
}

Episode read_episode_csv(const std::filesystem::path& path, double grasp_fraction) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_episode_csv(is, grasp_fraction);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    contents_ += (i ? "," : "") + header[i];
  }
  contents_ += '\n';
}

CsvWriter& CsvWriter::cell(const std::string& value) {
  row_ += (pending_ ? "," : "") + value;
  ++pending_;
  return *this;
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }

CsvWriter& CsvWriter::cell(std::size_t value) { return cell(std::to_string(value)); }

void CsvWriter::end_row() {
  if (pending_ != columns_) {
    throw IoError(path_.string() + ": row has " + std::to_string(pending_) + " cells, expected " +
                  std::to_string(columns_));
  }
  contents_ += row_ + '\n';
  row_.clear();
  pending_ = 0;
}

void CsvWriter::flush() { write_text(path_, contents_); }

CsvWriter::~CsvWriter() {
  try {
    flush();
  } catch (...) {
  }
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_line(line));
  }
  return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace branchinfer::io
