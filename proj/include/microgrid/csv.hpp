#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace microgrid {

/// A uniformly sampled scalar series read from or written to CSV.
struct TimeSeries {
  std::int64_t start_unix = 0;  // timestamp of the first sample
  int step_minutes = 15;
  Eigen::VectorXd values;
};

/// Parse "YYYY-MM-DDTHH:MM:SS" (optionally with trailing 'Z') as UTC seconds.
std::int64_t parse_iso8601(const std::string& s);

std::string format_iso8601(std::int64_t unix_seconds);

/// Read a two-column CSV `timestamp,<unit>`; validates the header's first
/// column, strictly increasing timestamps and uniform spacing.
TimeSeries read_series_csv(const std::string& path);

/// Write a series with the given value-column header (e.g. "kw").
void write_series_csv(const std::string& path, const TimeSeries& series,
                      const std::string& value_header);

/// Write a generic tidy CSV: one timestamp column plus named value columns.
void write_table_csv(const std::string& path, std::int64_t start_unix, int step_minutes,
                     const std::vector<std::string>& headers,
                     const std::vector<Eigen::VectorXd>& columns);

}  // namespace microgrid
