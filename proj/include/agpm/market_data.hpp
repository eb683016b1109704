#pragma once

#include "agpm/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agpm {

/// Seconds since 1970-01-01T00:00:00, no time zone.
using Timestamp = std::int64_t;

/// Parses "YYYY-MM-DDTHH:MM:SS" (a space may replace the 'T').
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);
/// Parses "YYYY-MM-DD" into the timestamp of its midnight.
Timestamp parse_date(std::string_view text);
/// Parses "HH:MM:SS" into seconds after midnight.
int parse_time_of_day(std::string_view text);
std::string format_time_of_day(int seconds);

struct OrderRecord {
  std::optional<Timestamp> create_time;
  std::optional<Timestamp> match_time;
  std::optional<Timestamp> pickup_time;
  std::optional<Timestamp> finish_time;
  double origin_lat = 0.0;
  double origin_lon = 0.0;
  double dest_lat = 0.0;
  double dest_lon = 0.0;
  std::optional<double> dispatch_lat;
  std::optional<double> dispatch_lon;

  friend bool operator==(const OrderRecord&, const OrderRecord&) = default;
};

/// Hexagon grid anchored at zone (1, 1) plus the daily analysis window.
///
/// Zones are pointy-top hexagons with circumradius hex_radius_m. Rows run
/// north to south and columns west to east; odd rows are shifted east by
/// half a column spacing relative to even rows.
struct GridConfig {
  int rows = 6;
  int cols = 6;
  double origin_lat = 30.25;
  double origin_lon = 120.15;
  double hex_radius_m = 1000.0;
  int interval_s = 180;
  /// Daily horizon as seconds after midnight, [start, end).
  int horizon_start_s = 7 * 3600 + 30 * 60;
  int horizon_end_s = 9 * 3600 + 30 * 60;
  /// Calendar days covered, "YYYY-MM-DD".
  std::vector<std::string> days;
  std::string adjacency_convention = "odd-r-east";

  int intervals() const;
  void validate() const;
};

struct Zone {
  int row = 0;
  int col = 0;
  friend bool operator==(const Zone&, const Zone&) = default;
};

struct GridShape {
  int rows = 0;
  int cols = 0;
  int intervals = 0;

  int zones() const { return rows * cols; }
  /// Zone index (row-major, 0-based) of 1-based (r, c).
  std::size_t zone_index(int r, int c) const { return static_cast<std::size_t>((r - 1) * cols + (c - 1)); }
  Zone zone_at(std::size_t index) const {
    return {static_cast<int>(index) / cols + 1, static_cast<int>(index) % cols + 1};
  }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

enum class Target { Matches, Pickups };
std::string_view target_name(Target target);
Target parse_target(std::string_view text);

enum class Field { Demand, Supply, Matches, Pickups };

struct PanelCell {
  double demand = 0.0;
  double supply = 0.0;
  double matches = 0.0;
  double pickups = 0.0;
  friend bool operator==(const PanelCell&, const PanelCell&) = default;
};

/// Dense panel: one cell per (day, row, col, interval), zero-filled.
class ObservationGrid {
 public:
  ObservationGrid() = default;
  ObservationGrid(GridShape shape, std::vector<std::string> days);

  const GridShape& shape() const { return shape_; }
  const std::vector<std::string>& days() const { return days_; }
  std::size_t num_days() const { return days_.size(); }
  std::size_t day_index(std::string_view label) const;

  /// r, c, t are 1-based.
  PanelCell& cell(std::size_t day, int r, int c, int t);
  const PanelCell& cell(std::size_t day, int r, int c, int t) const;

  /// Queue of unmatched passengers per zone at the start of each day.
  double initial_queue(std::size_t day, std::size_t zone) const;
  void set_initial_queue(std::size_t day, std::size_t zone, double value);
  Eigen::VectorXd initial_queue(std::size_t day) const;

  /// zones x intervals matrix of one field for one day.
  Eigen::MatrixXd field(std::size_t day, Field field) const;
  void set_field(std::size_t day, Field field, const Eigen::MatrixXd& values);

  /// Rows [r, c, t, demand, supply] for the given days in (day, r, c, t) order.
  Inputs inputs(std::span<const std::size_t> days) const;
  Eigen::VectorXd targets(std::span<const std::size_t> days, Target target) const;

  /// Copy restricted to the listed days.
  ObservationGrid subset(std::span<const std::size_t> days) const;

  friend bool operator==(const ObservationGrid&, const ObservationGrid&) = default;

 private:
  std::size_t offset(std::size_t day, int r, int c, int t) const;

  GridShape shape_;
  std::vector<std::string> days_;
  std::vector<PanelCell> cells_;
  std::vector<double> initial_queue_;
};

/// Input row [r, c, t, demand, supply] for one cell.
Inputs day_inputs(const GridShape& shape, const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply);

// ---- Hexagon geometry -------------------------------------------------------

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Center of a zone (1-based row/col; need not lie inside the grid).
LatLon zone_center(const Zone& zone, const GridConfig& config);

/// Nearest hexagon center; nullopt when that hexagon lies outside the grid.
std::optional<Zone> hex_zone_of(double lat, double lon, const GridConfig& config);

/// In-grid neighbors under the odd-row-shifted convention.
std::vector<Zone> hex_neighbors(const Zone& zone, int rows, int cols);

/// Neighbor lists indexed by zone index.
using Adjacency = std::vector<std::vector<std::size_t>>;
Adjacency grid_adjacency(int rows, int cols);

// ---- Aggregation ------------------------------------------------------------

struct DroppedEvents {
  std::size_t out_of_grid = 0;
  std::size_t out_of_horizon = 0;
  friend bool operator==(const DroppedEvents&, const DroppedEvents&) = default;
};

struct MalformedRecord {
  std::size_t index = 0;
  std::string reason;
};

struct AggregationResult {
  ObservationGrid grid;
  DroppedEvents dropped_demand;
  DroppedEvents dropped_supply;
  DroppedEvents dropped_matches;
  DroppedEvents dropped_pickups;
  std::vector<MalformedRecord> malformed;
};

/// Counts demand at (create time, origin), supply at (finish time,
/// destination), matches at (match time, origin) and pickups at (pickup
/// time, origin). Orders created before a day's horizon start and not yet
/// matched at that instant form the day's initial queue at their origin.
AggregationResult aggregate_orders(std::span<const OrderRecord> records, const GridConfig& config);

// ---- Persistence ------------------------------------------------------------

class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header day,r,c,t,demand,supply,matches,pickups; rows sorted by (day, r, c, t).
void save_grid(const ObservationGrid& grid, const std::filesystem::path& path);
ObservationGrid load_grid(const std::filesystem::path& path);

/// Header day,r,c,q0.
void save_initial_queue(const ObservationGrid& grid, const std::filesystem::path& path);
void load_initial_queue(ObservationGrid& grid, const std::filesystem::path& path);

void save_orders(std::span<const OrderRecord> records, const std::filesystem::path& path);
std::vector<OrderRecord> load_orders(const std::filesystem::path& path);

/// Decimal text with 17 significant digits (lossless for doubles).
std::string format_real(double value);

}  // namespace agpm
