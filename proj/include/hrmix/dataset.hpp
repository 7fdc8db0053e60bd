#pragma once

// Gridded daily panels: dates, CSV ingestion/emission and the FFDI formula.

#include <compare>
#include <iosfwd>
#include <string>
#include <vector>

#include "hrmix/graphs.hpp"

namespace hrmix {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// Strict YYYY-MM-DD; throws Parse on malformed or impossible dates.
  static Date parse(const std::string& text);
  std::string iso() const;
  Date next_day() const;
  auto operator<=>(const Date&) const = default;
};

/// Summer season of a date: Nov/Dec belong to their own year, Jan/Feb to the
/// previous one. Throws Domain for Mar-Oct.
int season_of(const Date& d);
bool in_summer(const Date& d);

struct GriddedDataset {
  std::vector<Site> sites;
  std::vector<Date> dates;                  // strictly increasing
  std::vector<std::vector<double>> values;  // sites x dates, NaN = missing

  std::size_t site_count() const noexcept { return sites.size(); }
  std::size_t time_count() const noexcept { return dates.size(); }
  void validate() const;
};

/// 2 exp(-0.45 + 0.987 ln df - 0.0345 rh + 0.0338 temp + 0.0234 wind).
/// Throws Domain for df <= 0 or rh outside [0, 100].
double ffdi(double df, double rh, double temp, double wind);

struct IngestOptions {
  /// Keep every second grid cell in each direction.
  bool thin = false;
};

/// Reads `site_id,lon,lat,date,value` or `site_id,lon,lat,date,df,rh,temp,wind`
/// (FFDI computed on the fly). Sites keep first-appearance order, dates are
/// sorted. Parse errors carry the line number; duplicate (site, date) rows
/// and inconsistent coordinates raise Integrity.
GriddedDataset read_dataset_csv(std::istream& in, const IngestOptions& options = {});
GriddedDataset ingest_csv(const std::string& path, const IngestOptions& options = {});

/// Long-format value CSV; missing cells are omitted.
void write_dataset_csv(const GriddedDataset& data, std::ostream& out);
void write_dataset_csv(const GriddedDataset& data, const std::string& path);

/// Every second grid cell in each direction, anchored at the minimum lon/lat.
GriddedDataset thin_grid(const GriddedDataset& data);

/// Sub-panel on the given site and time indices.
GriddedDataset subset(const GriddedDataset& data, const std::vector<std::size_t>& sites,
                      const std::vector<std::size_t>& times);

/// Shortest round-trip decimal form of a double; NaN prints as empty.
std::string format_number(double x);

}  // namespace hrmix
