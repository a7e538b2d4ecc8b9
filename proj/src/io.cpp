#include "vcdf/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "vcdf/scalemix.hpp"

namespace vcdf
{
namespace
{
std::ifstream open_in(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(std::filesystem::path const& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

std::string where(std::filesystem::path const& path, std::size_t row, std::size_t col)
{
    return path.string() + ": row " + std::to_string(row) + ", column "
           + std::to_string(col);
}

double parse_double(std::string_view cell,
                    std::filesystem::path const& path,
                    std::size_t row,
                    std::size_t col)
{
    double v = 0;
    auto const* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
    {
        throw DataError(where(path, row, col) + ": '" + std::string(cell)
                        + "' is not a finite number");
    }
    return v;
}

}  // namespace

std::vector<std::string_view> split_csv_line(std::string_view line)
{
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true)
    {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos)
        {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string format_double(double v)
{
    if (std::isnan(v))
        return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double Observations::missing_fraction() const
{
    if (values.size() == 0)
        return 0;
    return static_cast<double>(values.array().isNaN().count())
           / static_cast<double>(values.size());
}

std::vector<Station> read_stations(std::filesystem::path const& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path.string() + ": empty station file");
    auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "station_id" || header[1] != "x"
        || header[2] != "y")
    {
        throw DataError(path.string() + ": row 1: expected header 'station_id,x,y'");
    }

    std::vector<Station> stations;
    for (std::size_t row = 2; std::getline(in, line); ++row)
    {
        if (line.empty() || line == "\r")
            continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 3)
        {
            throw DataError(path.string() + ": row " + std::to_string(row)
                            + ": expected 3 columns, found "
                            + std::to_string(cells.size()));
        }
        if (cells[0].empty())
            throw DataError(where(path, row, 1) + ": empty station id");
        stations.push_back({std::string(cells[0]),
                            {parse_double(cells[1], path, row, 2),
                             parse_double(cells[2], path, row, 3)}});
    }
    return stations;
}

void write_stations(std::filesystem::path const& path,
                    std::vector<Station> const& stations)
{
    auto out = open_out(path);
    out << "station_id,x,y\n";
    for (auto const& s : stations)
        out << s.id << ',' << format_double(s.loc.x) << ',' << format_double(s.loc.y)
            << '\n';
    if (!out)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

Observations read_observations(std::filesystem::path const& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path.string() + ": empty observation file");
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "time")
    {
        throw DataError(path.string()
                        + ": row 1: expected header 'time,<station ids...>'");
    }

    Observations obs;
    for (std::size_t c = 1; c < header.size(); ++c)
    {
        if (header[c].empty())
            throw DataError(where(path, 1, c + 1) + ": empty station id");
        obs.station_ids.emplace_back(header[c]);
    }

    std::vector<std::vector<double>> rows;
    double const nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t row = 2; std::getline(in, line); ++row)
    {
        if (line.empty() || line == "\r")
            continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
        {
            throw DataError(path.string() + ": row " + std::to_string(row)
                            + ": expected " + std::to_string(header.size())
                            + " columns, found " + std::to_string(cells.size()));
        }
        obs.times.emplace_back(cells[0]);
        std::vector<double> values;
        for (std::size_t c = 1; c < cells.size(); ++c)
            values.push_back(cells[c].empty() ? nan
                                              : parse_double(cells[c], path, row, c + 1));
        rows.push_back(std::move(values));
    }

    obs.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(obs.station_ids.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
    {
        for (std::size_t c = 0; c < rows[t].size(); ++c)
            obs.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c))
                = rows[t][c];
    }
    return obs;
}

void write_observations(std::filesystem::path const& path, Observations const& obs)
{
    auto out = open_out(path);
    out << "time";
    for (auto const& id : obs.station_ids)
        out << ',' << id;
    out << '\n';
    for (Eigen::Index t = 0; t < obs.values.rows(); ++t)
    {
        out << (static_cast<std::size_t>(t) < obs.times.size()
                    ? obs.times[static_cast<std::size_t>(t)]
                    : std::to_string(t + 1));
        for (Eigen::Index c = 0; c < obs.values.cols(); ++c)
            out << ',' << format_double(obs.values(t, c));
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace vcdf
