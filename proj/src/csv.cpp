#include "microgrid/csv.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace microgrid {

std::int64_t parse_iso8601(const std::string& s) {
  std::tm tm{};
  int y, mo, d, h, mi, sec;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &sec) != 6)
    throw std::invalid_argument("bad ISO-8601 timestamp: " + s);
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  const std::time_t t = timegm(&tm);
  if (t == static_cast<std::time_t>(-1))
    throw std::invalid_argument("unrepresentable timestamp: " + s);
  return static_cast<std::int64_t>(t);
}

std::string format_iso8601(std::int64_t unix_seconds) {
  std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

TimeSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path);
  if (line.rfind("timestamp,", 0) != 0)
    throw std::runtime_error(path + ": expected header starting with 'timestamp,'");

  std::vector<std::int64_t> stamps;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    stamps.push_back(parse_iso8601(line.substr(0, comma)));
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  if (stamps.size() < 2) throw std::runtime_error(path + ": need at least 2 samples");

  const std::int64_t step = stamps[1] - stamps[0];
  if (step <= 0 || step % 60 != 0)
    throw std::runtime_error(path + ": timestamps must increase in whole minutes");
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if (stamps[i] - stamps[i - 1] != step)
      throw std::runtime_error(path + ": non-uniform timestamp spacing at row " +
                               std::to_string(i + 1));
  }

  TimeSeries s;
  s.start_unix = stamps[0];
  s.step_minutes = static_cast<int>(step / 60);
  s.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return s;
}

void write_series_csv(const std::string& path, const TimeSeries& series,
                      const std::string& value_header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  out << "timestamp," << value_header << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < series.values.size(); ++i) {
    const std::int64_t t = series.start_unix + static_cast<std::int64_t>(i) * 60 * series.step_minutes;
    std::snprintf(buf, sizeof(buf), "%.10g", series.values[i]);
    out << format_iso8601(t) << ',' << buf << "\n";
  }
}

void write_table_csv(const std::string& path, std::int64_t start_unix, int step_minutes,
                     const std::vector<std::string>& headers,
                     const std::vector<Eigen::VectorXd>& columns) {
  if (headers.size() != columns.size())
    throw std::invalid_argument("write_table_csv: header/column count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  out << "timestamp";
  for (const auto& h : headers) out << ',' << h;
  out << "\n";
  const Eigen::Index rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw std::invalid_argument("write_table_csv: ragged columns");
  }
  char buf[64];
  for (Eigen::Index i = 0; i < rows; ++i) {
    out << format_iso8601(start_unix + static_cast<std::int64_t>(i) * 60 * step_minutes);
    for (const auto& c : columns) {
      std::snprintf(buf, sizeof(buf), "%.10g", c[i]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace microgrid
