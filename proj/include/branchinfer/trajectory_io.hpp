#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchinfer/dynamics.hpp"

namespace branchinfer::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A force profile paired with the trajectory it produced (or was measured
// with).
struct Episode {
  dynamics::ForceProfile profile;
  dynamics::Trajectory trajectory;
};

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Columns: t, force_z, pos_x, pos_z, vel_x, vel_z. force_z is the signed force
// along gravity (positive down), t = (i + 1) * dt_obs.
void write_episode_csv(std::ostream& os, const Episode& episode);
void write_episode_csv(const std::filesystem::path& path, const Episode& episode);
Episode read_episode_csv(std::istream& is, double grasp_fraction);
Episode read_episode_csv(const std::filesystem::path& path, double grasp_fraction);

// Minimal row-oriented CSV writer with a mandatory header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& cell(const std::string& value);
  CsvWriter& cell(double value);
  CsvWriter& cell(std::size_t value);
  void end_row();
  // Written on destruction as well; call explicitly to surface I/O errors.
  void flush();

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::size_t pending_ = 0;
  std::string row_;
  std::string contents_;
};

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace branchinfer::io
