#include "hrmix/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hrmix/error.hpp"

namespace hrmix {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

double parse_double(const std::string& s, std::size_t line, const char* field) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw Error(ErrorKind::Parse,
                fmt::format("line {}: cannot parse {} '{}'", line, field, s));
  return v;
}

}  // namespace

Date Date::parse(const std::string& text) {
  Date d;
  const bool shape = text.size() == 10 && text[4] == '-' && text[7] == '-';
  auto num = [&](std::size_t pos, std::size_t len, int& out) {
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc() && ptr == text.data() + pos + len;
  };
  if (!shape || !num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day))
    throw Error(ErrorKind::Parse, "malformed date '" + text + "' (expected YYYY-MM-DD)");
  const std::chrono::year_month_day ymd{std::chrono::year{d.year},
                                        std::chrono::month{static_cast<unsigned>(d.month)},
                                        std::chrono::day{static_cast<unsigned>(d.day)}};
  if (!ymd.ok()) throw Error(ErrorKind::Parse, "invalid calendar date '" + text + "'");
  return d;
}

std::string Date::iso() const { return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day); }

Date Date::next_day() const {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{year_month_day{std::chrono::year{year},
                                                  std::chrono::month{static_cast<unsigned>(month)},
                                                  std::chrono::day{static_cast<unsigned>(day)}}} +
                           days{1}};
  return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
          static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

bool in_summer(const Date& d) { return d.month >= 11 || d.month <= 2; }

int season_of(const Date& d) {
  if (!in_summer(d)) throw Error(ErrorKind::Domain, "date " + d.iso() + " is outside Nov-Feb");
  return d.month >= 11 ? d.year : d.year - 1;
}

void GriddedDataset::validate() const {
  if (values.size() != sites.size()) throw Error(ErrorKind::Integrity, "value rows do not match sites");
  for (const auto& row : values)
    if (row.size() != dates.size()) throw Error(ErrorKind::Integrity, "value columns do not match dates");
  for (std::size_t t = 1; t < dates.size(); ++t)
    if (!(dates[t - 1] < dates[t])) throw Error(ErrorKind::Integrity, "dates must be strictly increasing");
  for (const auto& s : sites)
    if (!std::isfinite(s.lon) || !std::isfinite(s.lat))
      throw Error(ErrorKind::Validation, "site " + s.id + " has non-finite coordinates");
}

double ffdi(double df, double rh, double temp, double wind) {
  if (!(df > 0.0)) throw Error(ErrorKind::Domain, "drought factor must be positive");
  if (!(rh >= 0.0 && rh <= 100.0)) throw Error(ErrorKind::Domain, "relative humidity must lie in [0, 100]");
  return 2.0 * std::exp(-0.45 + 0.987 * std::log(df) - 0.0345 * rh + 0.0338 * temp + 0.0234 * wind);
}

GriddedDataset read_dataset_csv(std::istream& in, const IngestOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorKind::Parse, "empty input: no header row");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  const std::vector<std::string> value_cols{"site_id", "lon", "lat", "date", "value"};
  const std::vector<std::string> raw_cols{"site_id", "lon", "lat", "date", "df", "rh", "temp", "wind"};
  const bool raw = header == raw_cols;
  if (!raw && header != value_cols)
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) +
                                      ": header must be 'site_id,lon,lat,date,value' or "
                                      "'site_id,lon,lat,date,df,rh,temp,wind'");

  struct Row {
    std::size_t site;
    Date date;
    double value;
  };
  std::vector<Row> rows;
  GriddedDataset data;
  std::unordered_map<std::string, std::size_t> site_index;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::Parse, fmt::format("line {}: expected {} fields, found {}", line_no,
                                                header.size(), f.size()));
    if (f[0].empty()) throw Error(ErrorKind::Parse, fmt::format("line {}: empty site_id", line_no));
    const double lon = parse_double(f[1], line_no, "lon");
    const double lat = parse_double(f[2], line_no, "lat");
    Date date;
    try {
      date = Date::parse(f[3]);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, fmt::format("line {}: {}", line_no, e.what()));
    }
    double value = kNaN;
    if (raw) {
      if (!(is_missing(f[4]) || is_missing(f[5]) || is_missing(f[6]) || is_missing(f[7]))) {
        const double df = parse_double(f[4], line_no, "df");
        const double rh = parse_double(f[5], line_no, "rh");
        const double temp = parse_double(f[6], line_no, "temp");
        const double wind = parse_double(f[7], line_no, "wind");
        if (!(rh >= 0.0 && rh <= 100.0))
          throw Error(ErrorKind::Validation, fmt::format("line {}: rh = {} outside [0, 100]", line_no, f[5]));
        if (!(df > 0.0))
          throw Error(ErrorKind::Validation, fmt::format("line {}: df = {} must be positive", line_no, f[4]));
        value = ffdi(df, rh, temp, wind);
      }
    } else if (!is_missing(f[4])) {
      value = parse_double(f[4], line_no, "value");
    }

    auto [it, inserted] = site_index.emplace(f[0], data.sites.size());
    if (inserted) {
      data.sites.push_back({f[0], lon, lat});
    } else {
      const auto& s = data.sites[it->second];
      if (s.lon != lon || s.lat != lat)
        throw Error(ErrorKind::Integrity,
                    fmt::format("line {}: site {} changes coordinates", line_no, f[0]));
    }
    rows.push_back({it->second, date, value});
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "empty input: header without data rows");

  for (const auto& r : rows) data.dates.push_back(r.date);
  std::sort(data.dates.begin(), data.dates.end());
  data.dates.erase(std::unique(data.dates.begin(), data.dates.end()), data.dates.end());
  std::map<Date, std::size_t> date_index;
  for (std::size_t t = 0; t < data.dates.size(); ++t) date_index[data.dates[t]] = t;

  data.values.assign(data.sites.size(), std::vector<double>(data.dates.size(), kNaN));
  std::vector<std::vector<char>> seen(data.sites.size(), std::vector<char>(data.dates.size(), 0));
  for (const auto& r : rows) {
    const std::size_t t = date_index[r.date];
    if (seen[r.site][t])
      throw Error(ErrorKind::Integrity, "duplicate row for site " + data.sites[r.site].id + " on " + r.date.iso());
    seen[r.site][t] = 1;
    data.values[r.site][t] = r.value;
  }
  data.validate();
  return options.thin ? thin_grid(data) : data;
}

GriddedDataset ingest_csv(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_dataset_csv(in, options);
}

std::string format_number(double x) {
  if (std::isnan(x)) return {};
  return fmt::format("{}", x);
}

void write_dataset_csv(const GriddedDataset& data, std::ostream& out) {
  data.validate();
  out << "site_id,lon,lat,date,value\n";
  for (std::size_t i = 0; i < data.sites.size(); ++i) {
    const auto& s = data.sites[i];
    const std::string prefix = s.id + "," + format_number(s.lon) + "," + format_number(s.lat) + ",";
    for (std::size_t t = 0; t < data.dates.size(); ++t) {
      if (std::isnan(data.values[i][t])) continue;
      out << prefix << data.dates[t].iso() << ',' << format_number(data.values[i][t]) << '\n';
    }
  }
}

void write_dataset_csv(const GriddedDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  write_dataset_csv(data, out);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

GriddedDataset thin_grid(const GriddedDataset& data) {
  if (data.sites.empty()) return data;
  auto axis = [&](auto coord) {
    std::vector<double> v;
    for (const auto& s : data.sites) v.push_back(coord(s));
    std::sort(v.begin(), v.end());
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] - v[k - 1] > 1e-9) step = std::min(step, v[k] - v[k - 1]);
    return std::pair{v.front(), std::isfinite(step) ? step : 1.0};
  };
  const auto [lon0, dlon] = axis([](const Site& s) { return s.lon; });
  const auto [lat0, dlat] = axis([](const Site& s) { return s.lat; });
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.sites.size(); ++i) {
    const long ix = std::lround((data.sites[i].lon - lon0) / dlon);
    const long iy = std::lround((data.sites[i].lat - lat0) / dlat);
    if (ix % 2 == 0 && iy % 2 == 0) keep.push_back(i);
  }
  std::vector<std::size_t> times(data.dates.size());
  for (std::size_t t = 0; t < times.size(); ++t) times[t] = t;
  return subset(data, keep, times);
}

GriddedDataset subset(const GriddedDataset& data, const std::vector<std::size_t>& sites,
                      const std::vector<std::size_t>& times) {
  GriddedDataset out;
  for (std::size_t t : times) out.dates.push_back(data.dates.at(t));
  for (std::size_t i : sites) {
    out.sites.push_back(data.sites.at(i));
    std::vector<double> row;
    row.reserve(times.size());
    for (std::size_t t : times) row.push_back(data.values[i].at(t));
    out.values.push_back(std::move(row));
  }
  return out;
}

}  // namespace hrmix
