#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "covariance.hpp"

namespace vcdf
{
//! Malformed input file; the message carries file, row and column.
class DataError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct Station
{
    std::string id;
    Location loc;
};

/*!
 * Weekly-maxima style table: one row per time point, one column per
 * station, NaN where the cell was empty.
 */
struct Observations
{
    std::vector<std::string> times;
    std::vector<std::string> station_ids;
    Eigen::MatrixXd values;

    double missing_fraction() const;
};

//! Shortest decimal form that parses back to the same double.
std::string format_double(double v);

//! Header `station_id,x,y`.
std::vector<Station> read_stations(std::filesystem::path const& path);
void write_stations(std::filesystem::path const& path,
                    std::vector<Station> const& stations);

//! Header `time,<station ids...>`; empty cells are missing.
Observations read_observations(std::filesystem::path const& path);
void write_observations(std::filesystem::path const& path, Observations const& obs);

//! Split one CSV line on commas (no quoting) and strip a trailing CR.
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace vcdf
