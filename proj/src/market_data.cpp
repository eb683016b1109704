#include "agpm/market_data.hpp"

#include "csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <tuple>

namespace agpm {

namespace {

constexpr double kEarthRadiusM = 6371008.8;
constexpr Timestamp kSecondsPerDay = 86400;

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char ch = text[i];
    if (ch < '0' || ch > '9') throw DataFormatError("malformed date/time '" + std::string(whole) + "'");
    value = value * 10 + (ch - '0');
  }
  return value;
}

Timestamp days_from_civil(int y, int m, int d) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataFormatError("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count();
}

// Local tangent-plane coordinates in meters, x east and y north of the anchor.
struct Planar {
  double x;
  double y;
};

Planar to_planar(double lat, double lon, const GridConfig& config) {
  const double k = std::numbers::pi / 180.0 * kEarthRadiusM;
  return {(lon - config.origin_lon) * k * std::cos(config.origin_lat * std::numbers::pi / 180.0),
          (lat - config.origin_lat) * k};
}

Planar center_planar(int r, int c, double radius) {
  const double w = std::sqrt(3.0) * radius;
  const double shift = (r % 2 == 0) ? -0.5 * w : 0.0;
  return {(c - 1) * w + shift, -(r - 1) * 1.5 * radius};
}

std::tuple<std::string, int, int, int> panel_key(const std::vector<std::string>& row, std::size_t line,
                                                 const csv::Header& header) {
  return {row[header.at("day")], csv::to_int(row[header.at("r")], line, "r"),
          csv::to_int(row[header.at("c")], line, "c"), csv::to_int(row[header.at("t")], line, "t")};
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw DataFormatError("malformed timestamp '" + std::string(text) + "'; expected YYYY-MM-DDTHH:MM:SS");
  }
  const Timestamp day = parse_date(text.substr(0, 10));
  return day + parse_time_of_day(text.substr(11));
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const Timestamp days = (ts >= 0 ? ts : ts - (kSecondsPerDay - 1)) / kSecondsPerDay;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  const Timestamp sod = ts - days * kSecondsPerDay;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(sod / 3600),
                static_cast<int>((sod / 60) % 60), static_cast<int>(sod % 60));
  return buf;
}

Timestamp parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataFormatError("malformed date '" + std::string(text) + "'; expected YYYY-MM-DD");
  }
  return days_from_civil(parse_fixed_int(text, 0, 4, text), parse_fixed_int(text, 5, 2, text),
                         parse_fixed_int(text, 8, 2, text)) *
         kSecondsPerDay;
}

int parse_time_of_day(std::string_view text) {
  if (text.size() != 8 || text[2] != ':' || text[5] != ':') {
    throw DataFormatError("malformed time '" + std::string(text) + "'; expected HH:MM:SS");
  }
  const int h = parse_fixed_int(text, 0, 2, text);
  const int m = parse_fixed_int(text, 3, 2, text);
  const int s = parse_fixed_int(text, 6, 2, text);
  if (h > 24 || m > 59 || s > 59 || (h == 24 && (m > 0 || s > 0))) {
    throw DataFormatError("time of day out of range '" + std::string(text) + "'");
  }
  return h * 3600 + m * 60 + s;
}

std::string format_time_of_day(int seconds) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", seconds / 3600, (seconds / 60) % 60, seconds % 60);
  return buf;
}

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

int GridConfig::intervals() const { return (horizon_end_s - horizon_start_s) / interval_s; }

void GridConfig::validate() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("grid needs at least one row and one column");
  if (interval_s <= 0) throw std::invalid_argument("interval_s must be positive");
  if (!(hex_radius_m > 0.0)) throw std::invalid_argument("hex_radius_m must be positive");
  if (horizon_start_s < 0 || horizon_end_s > 86400 || horizon_start_s >= horizon_end_s) {
    throw std::invalid_argument("horizon must satisfy 0 <= start < end <= 24:00:00");
  }
  if ((horizon_end_s - horizon_start_s) % interval_s != 0) {
    throw std::invalid_argument("horizon length must be a whole number of intervals");
  }
  if (adjacency_convention != "odd-r-east") {
    throw std::invalid_argument("unsupported adjacency convention '" + adjacency_convention + "'");
  }
  for (const auto& d : days) parse_date(d);
}

std::string_view target_name(Target target) { return target == Target::Matches ? "matches" : "pickups"; }

Target parse_target(std::string_view text) {
  if (text == "matches") return Target::Matches;
  if (text == "pickups") return Target::Pickups;
  throw std::invalid_argument("unknown target '" + std::string(text) + "'; expected matches or pickups");
}

// ---- ObservationGrid --------------------------------------------------------

ObservationGrid::ObservationGrid(GridShape shape, std::vector<std::string> days)
    : shape_(shape), days_(std::move(days)) {
  if (shape_.rows < 1 || shape_.cols < 1 || shape_.intervals < 1) {
    throw std::invalid_argument("grid shape must be at least 1x1x1");
  }
  cells_.assign(days_.size() * static_cast<std::size_t>(shape_.zones() * shape_.intervals), PanelCell{});
  initial_queue_.assign(days_.size() * static_cast<std::size_t>(shape_.zones()), 0.0);
}

std::size_t ObservationGrid::day_index(std::string_view label) const {
  const auto it = std::find(days_.begin(), days_.end(), label);
  if (it == days_.end()) throw std::out_of_range("day '" + std::string(label) + "' is not in the grid");
  return static_cast<std::size_t>(it - days_.begin());
}

std::size_t ObservationGrid::offset(std::size_t day, int r, int c, int t) const {
  if (day >= days_.size() || r < 1 || r > shape_.rows || c < 1 || c > shape_.cols || t < 1 ||
      t > shape_.intervals) {
    throw std::out_of_range("cell (" + std::to_string(day) + ", " + std::to_string(r) + ", " + std::to_string(c) +
                            ", " + std::to_string(t) + ") outside the grid");
  }
  return ((day * static_cast<std::size_t>(shape_.rows) + static_cast<std::size_t>(r - 1)) *
              static_cast<std::size_t>(shape_.cols) +
          static_cast<std::size_t>(c - 1)) *
             static_cast<std::size_t>(shape_.intervals) +
         static_cast<std::size_t>(t - 1);
}

PanelCell& ObservationGrid::cell(std::size_t day, int r, int c, int t) { return cells_[offset(day, r, c, t)]; }

const PanelCell& ObservationGrid::cell(std::size_t day, int r, int c, int t) const {
  return cells_[offset(day, r, c, t)];
}

double ObservationGrid::initial_queue(std::size_t day, std::size_t zone) const {
  return initial_queue_.at(day * static_cast<std::size_t>(shape_.zones()) + zone);
}

void ObservationGrid::set_initial_queue(std::size_t day, std::size_t zone, double value) {
  if (!(value >= 0.0)) throw std::invalid_argument("initial queue must be non-negative");
  initial_queue_.at(day * static_cast<std::size_t>(shape_.zones()) + zone) = value;
}

Eigen::VectorXd ObservationGrid::initial_queue(std::size_t day) const {
  Eigen::VectorXd q(shape_.zones());
  for (int z = 0; z < shape_.zones(); ++z) q[z] = initial_queue(day, static_cast<std::size_t>(z));
  return q;
}

Eigen::MatrixXd ObservationGrid::field(std::size_t day, Field which) const {
  Eigen::MatrixXd out(shape_.zones(), shape_.intervals);
  for (int r = 1; r <= shape_.rows; ++r) {
    for (int c = 1; c <= shape_.cols; ++c) {
      const auto z = static_cast<Eigen::Index>(shape_.zone_index(r, c));
      for (int t = 1; t <= shape_.intervals; ++t) {
        const auto& x = cell(day, r, c, t);
        double v = 0.0;
        switch (which) {
          case Field::Demand: v = x.demand; break;
          case Field::Supply: v = x.supply; break;
          case Field::Matches: v = x.matches; break;
          case Field::Pickups: v = x.pickups; break;
        }
        out(z, t - 1) = v;
      }
    }
  }
  return out;
}

void ObservationGrid::set_field(std::size_t day, Field which, const Eigen::MatrixXd& values) {
  if (values.rows() != shape_.zones() || values.cols() != shape_.intervals) {
    throw std::invalid_argument("field matrix must be zones x intervals");
  }
  for (int r = 1; r <= shape_.rows; ++r) {
    for (int c = 1; c <= shape_.cols; ++c) {
      const auto z = static_cast<Eigen::Index>(shape_.zone_index(r, c));
      for (int t = 1; t <= shape_.intervals; ++t) {
        auto& x = cell(day, r, c, t);
        const double v = values(z, t - 1);
        switch (which) {
          case Field::Demand: x.demand = v; break;
          case Field::Supply: x.supply = v; break;
          case Field::Matches: x.matches = v; break;
          case Field::Pickups: x.pickups = v; break;
        }
      }
    }
  }
}

Inputs ObservationGrid::inputs(std::span<const std::size_t> days) const {
  const auto per_day = static_cast<Eigen::Index>(shape_.zones() * shape_.intervals);
  Inputs X(per_day * static_cast<Eigen::Index>(days.size()), static_cast<Eigen::Index>(kNumCovariates));
  Eigen::Index row = 0;
  for (std::size_t d : days) {
    for (int r = 1; r <= shape_.rows; ++r)
      for (int c = 1; c <= shape_.cols; ++c)
        for (int t = 1; t <= shape_.intervals; ++t) {
          const auto& x = cell(d, r, c, t);
          X.row(row++) << r, c, t, x.demand, x.supply;
        }
  }
  return X;
}

Eigen::VectorXd ObservationGrid::targets(std::span<const std::size_t> days, Target target) const {
  const auto per_day = static_cast<Eigen::Index>(shape_.zones() * shape_.intervals);
  Eigen::VectorXd Y(per_day * static_cast<Eigen::Index>(days.size()));
  Eigen::Index row = 0;
  for (std::size_t d : days) {
    for (int r = 1; r <= shape_.rows; ++r)
      for (int c = 1; c <= shape_.cols; ++c)
        for (int t = 1; t <= shape_.intervals; ++t) {
          const auto& x = cell(d, r, c, t);
          Y[row++] = target == Target::Matches ? x.matches : x.pickups;
        }
  }
  return Y;
}

ObservationGrid ObservationGrid::subset(std::span<const std::size_t> days) const {
  std::vector<std::string> labels;
  for (std::size_t d : days) labels.push_back(days_.at(d));
  ObservationGrid out(shape_, labels);
  for (std::size_t i = 0; i < days.size(); ++i) {
    for (int r = 1; r <= shape_.rows; ++r)
      for (int c = 1; c <= shape_.cols; ++c)
        for (int t = 1; t <= shape_.intervals; ++t) out.cell(i, r, c, t) = cell(days[i], r, c, t);
    for (int z = 0; z < shape_.zones(); ++z) {
      out.set_initial_queue(i, static_cast<std::size_t>(z), initial_queue(days[i], static_cast<std::size_t>(z)));
    }
  }
  return out;
}

Inputs day_inputs(const GridShape& shape, const Eigen::MatrixXd& demand, const Eigen::MatrixXd& supply) {
  if (demand.rows() != shape.zones() || demand.cols() != shape.intervals || supply.rows() != demand.rows() ||
      supply.cols() != demand.cols()) {
    throw std::invalid_argument("demand/supply panels must be zones x intervals");
  }
  Inputs X(static_cast<Eigen::Index>(shape.zones()) * shape.intervals, static_cast<Eigen::Index>(kNumCovariates));
  Eigen::Index row = 0;
  for (int z = 0; z < shape.zones(); ++z) {
    const Zone zone = shape.zone_at(static_cast<std::size_t>(z));
    for (int t = 0; t < shape.intervals; ++t) X.row(row++) << zone.row, zone.col, t + 1, demand(z, t), supply(z, t);
  }
  return X;
}

// ---- Hexagon geometry -------------------------------------------------------

LatLon zone_center(const Zone& zone, const GridConfig& config) {
  const Planar p = center_planar(zone.row, zone.col, config.hex_radius_m);
  const double k = std::numbers::pi / 180.0 * kEarthRadiusM;
  return {config.origin_lat + p.y / k,
          config.origin_lon + p.x / (k * std::cos(config.origin_lat * std::numbers::pi / 180.0))};
}

std::optional<Zone> hex_zone_of(double lat, double lon, const GridConfig& config) {
  const double radius = config.hex_radius_m;
  const double w = std::sqrt(3.0) * radius;
  const Planar p = to_planar(lat, lon, config);
  const int row_guess = static_cast<int>(std::floor(1.0 - p.y / (1.5 * radius)));

  Zone best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int r = row_guess - 1; r <= row_guess + 2; ++r) {
    const double shift = (r % 2 == 0) ? -0.5 * w : 0.0;
    const int col_guess = static_cast<int>(std::floor((p.x - shift) / w)) + 1;
    for (int c = col_guess - 1; c <= col_guess + 1; ++c) {
      const Planar q = center_planar(r, c, radius);
      const double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = {r, c};
      }
    }
  }
  if (best.row < 1 || best.row > config.rows || best.col < 1 || best.col > config.cols) return std::nullopt;
  return best;
}

std::vector<Zone> hex_neighbors(const Zone& zone, int rows, int cols) {
  if (zone.row < 1 || zone.row > rows || zone.col < 1 || zone.col > cols) {
    throw std::out_of_range("zone (" + std::to_string(zone.row) + ", " + std::to_string(zone.col) +
                            ") is outside the grid");
  }
  const int delta = (zone.row % 2 == 1) ? 1 : -1;
  const Zone candidates[] = {{zone.row, zone.col - 1},         {zone.row, zone.col + 1},
                             {zone.row - 1, zone.col},         {zone.row + 1, zone.col},
                             {zone.row - 1, zone.col + delta}, {zone.row + 1, zone.col + delta}};
  std::vector<Zone> out;
  for (const auto& z : candidates) {
    if (z.row >= 1 && z.row <= rows && z.col >= 1 && z.col <= cols) out.push_back(z);
  }
  return out;
}

Adjacency grid_adjacency(int rows, int cols) {
  const GridShape shape{rows, cols, 1};
  Adjacency adj(static_cast<std::size_t>(rows * cols));
  for (int r = 1; r <= rows; ++r) {
    for (int c = 1; c <= cols; ++c) {
      auto& list = adj[shape.zone_index(r, c)];
      for (const auto& n : hex_neighbors({r, c}, rows, cols)) list.push_back(shape.zone_index(n.row, n.col));
      std::sort(list.begin(), list.end());
    }
  }
  return adj;
}

// ---- Aggregation ------------------------------------------------------------

AggregationResult aggregate_orders(std::span<const OrderRecord> records, const GridConfig& config) {
  config.validate();
  const GridShape shape{config.rows, config.cols, config.intervals()};
  AggregationResult out;
  out.grid = ObservationGrid(shape, config.days);

  std::map<Timestamp, std::size_t> day_of_midnight;
  for (std::size_t d = 0; d < config.days.size(); ++d) day_of_midnight[parse_date(config.days[d])] = d;

  struct Slot {
    std::size_t day;
    int t;
  };
  auto locate_time = [&](Timestamp ts) -> std::optional<Slot> {
    const Timestamp midnight = (ts >= 0 ? ts / kSecondsPerDay : (ts - kSecondsPerDay + 1) / kSecondsPerDay) *
                               kSecondsPerDay;
    const auto it = day_of_midnight.find(midnight);
    if (it == day_of_midnight.end()) return std::nullopt;
    const Timestamp sod = ts - midnight;
    if (sod < config.horizon_start_s || sod >= config.horizon_end_s) return std::nullopt;
    return Slot{it->second, static_cast<int>((sod - config.horizon_start_s) / config.interval_s) + 1};
  };

  auto tally = [&](const std::optional<Timestamp>& ts, double lat, double lon, DroppedEvents& dropped,
                   double PanelCell::*member) {
    if (!ts) return;
    const auto slot = locate_time(*ts);
    if (!slot) {
      ++dropped.out_of_horizon;
      return;
    }
    const auto zone = hex_zone_of(lat, lon, config);
    if (!zone) {
      ++dropped.out_of_grid;
      return;
    }
    out.grid.cell(slot->day, zone->row, zone->col, slot->t).*member += 1.0;
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::optional<Timestamp> times[] = {rec.create_time, rec.match_time, rec.pickup_time, rec.finish_time};
    const char* names[] = {"create_time", "match_time", "pickup_time", "finish_time"};
    std::string problem;
    std::optional<std::size_t> last;
    for (std::size_t k = 0; k < 4 && problem.empty(); ++k) {
      if (!times[k]) continue;
      if (last && *times[*last] > *times[k]) {
        problem = std::string(names[*last]) + " is later than " + names[k];
      }
      last = k;
    }
    if (problem.empty() && (!std::isfinite(rec.origin_lat) || !std::isfinite(rec.origin_lon) ||
                            !std::isfinite(rec.dest_lat) || !std::isfinite(rec.dest_lon))) {
      problem = "non-finite coordinates";
    }
    if (!problem.empty()) {
      out.malformed.push_back({i, problem});
      continue;
    }

    tally(rec.create_time, rec.origin_lat, rec.origin_lon, out.dropped_demand, &PanelCell::demand);
    tally(rec.finish_time, rec.dest_lat, rec.dest_lon, out.dropped_supply, &PanelCell::supply);
    tally(rec.match_time, rec.origin_lat, rec.origin_lon, out.dropped_matches, &PanelCell::matches);
    tally(rec.pickup_time, rec.origin_lat, rec.origin_lon, out.dropped_pickups, &PanelCell::pickups);

    // Initial queue: created earlier on a covered day, still unmatched at horizon start.
    if (rec.create_time) {
      const Timestamp ts = *rec.create_time;
      const Timestamp midnight = (ts >= 0 ? ts / kSecondsPerDay : (ts - kSecondsPerDay + 1) / kSecondsPerDay) *
                                 kSecondsPerDay;
      const auto it = day_of_midnight.find(midnight);
      const Timestamp start = midnight + config.horizon_start_s;
      if (it != day_of_midnight.end() && ts < start && (!rec.match_time || *rec.match_time >= start)) {
        if (const auto zone = hex_zone_of(rec.origin_lat, rec.origin_lon, config)) {
          const auto z = shape.zone_index(zone->row, zone->col);
          out.grid.set_initial_queue(it->second, z, out.grid.initial_queue(it->second, z) + 1.0);
        }
      }
    }
  }
  return out;
}

// ---- Persistence ------------------------------------------------------------

void save_grid(const ObservationGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "day,r,c,t,demand,supply,matches,pickups\n";
  const auto& s = grid.shape();
  for (std::size_t d = 0; d < grid.num_days(); ++d)
    for (int r = 1; r <= s.rows; ++r)
      for (int c = 1; c <= s.cols; ++c)
        for (int t = 1; t <= s.intervals; ++t) {
          const auto& x = grid.cell(d, r, c, t);
          out << grid.days()[d] << ',' << r << ',' << c << ',' << t << ',' << format_real(x.demand) << ','
              << format_real(x.supply) << ',' << format_real(x.matches) << ',' << format_real(x.pickups) << '\n';
        }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ObservationGrid load_grid(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto header = csv::require_columns(table, {"day", "r", "c", "t", "demand", "supply", "matches", "pickups"},
                                           path.string());

  std::vector<std::string> days;
  int rows = 0;
  int cols = 0;
  int intervals = 0;
  std::map<std::tuple<std::string, int, int, int>, PanelCell> cells;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    auto key = panel_key(row, line, header);
    const auto& [day, r, c, t] = key;
    if (r < 1 || c < 1 || t < 1) {
      throw DataFormatError(path.string() + ":" + std::to_string(line) + ": r, c and t must be at least 1");
    }
    PanelCell cell{csv::to_real(row[header.at("demand")], line, "demand"),
                   csv::to_real(row[header.at("supply")], line, "supply"),
                   csv::to_real(row[header.at("matches")], line, "matches"),
                   csv::to_real(row[header.at("pickups")], line, "pickups")};
    if (!(cell.demand >= 0.0 && cell.supply >= 0.0 && cell.matches >= 0.0 && cell.pickups >= 0.0)) {
      throw DataFormatError(path.string() + ":" + std::to_string(line) + ": counts must be non-negative");
    }
    if (std::find(days.begin(), days.end(), day) == days.end()) days.push_back(day);
    rows = std::max(rows, r);
    cols = std::max(cols, c);
    intervals = std::max(intervals, t);
    if (!cells.emplace(key, cell).second) {
      throw DataFormatError(path.string() + ":" + std::to_string(line) + ": duplicate row for (day, r, c, t) = (" +
                            day + ", " + std::to_string(r) + ", " + std::to_string(c) + ", " + std::to_string(t) +
                            ")");
    }
  }
  if (cells.empty()) throw DataFormatError(path.string() + ": panel has no rows");

  ObservationGrid grid({rows, cols, intervals}, days);
  for (std::size_t d = 0; d < days.size(); ++d)
    for (int r = 1; r <= rows; ++r)
      for (int c = 1; c <= cols; ++c)
        for (int t = 1; t <= intervals; ++t) {
          const auto it = cells.find({days[d], r, c, t});
          if (it == cells.end()) {
            throw DataFormatError(path.string() + ": shape violation, missing row for (day, r, c, t) = (" + days[d] +
                                  ", " + std::to_string(r) + ", " + std::to_string(c) + ", " + std::to_string(t) +
                                  "); expected " + std::to_string(rows) + "x" + std::to_string(cols) + "x" +
                                  std::to_string(intervals) + " rows per day");
          }
          grid.cell(d, r, c, t) = it->second;
        }
  return grid;
}

void save_initial_queue(const ObservationGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "day,r,c,q0\n";
  const auto& s = grid.shape();
  for (std::size_t d = 0; d < grid.num_days(); ++d)
    for (int r = 1; r <= s.rows; ++r)
      for (int c = 1; c <= s.cols; ++c) {
        out << grid.days()[d] << ',' << r << ',' << c << ','
            << format_real(grid.initial_queue(d, s.zone_index(r, c))) << '\n';
      }
}

void load_initial_queue(ObservationGrid& grid, const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto header = csv::require_columns(table, {"day", "r", "c", "q0"}, path.string());
  const auto& s = grid.shape();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    const auto& label = row[header.at("day")];
    const auto days = grid.days();
    if (std::find(days.begin(), days.end(), label) == days.end()) continue;
    const int r = csv::to_int(row[header.at("r")], line, "r");
    const int c = csv::to_int(row[header.at("c")], line, "c");
    if (r < 1 || r > s.rows || c < 1 || c > s.cols) {
      throw DataFormatError(path.string() + ":" + std::to_string(line) + ": zone outside the grid");
    }
    grid.set_initial_queue(grid.day_index(label), s.zone_index(r, c), csv::to_real(row[header.at("q0")], line, "q0"));
  }
}

void save_orders(std::span<const OrderRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  bool dispatch = false;
  for (const auto& r : records) dispatch = dispatch || r.dispatch_lat.has_value() || r.dispatch_lon.has_value();
  out << "create_time,match_time,pickup_time,finish_time,origin_lat,origin_lon,dest_lat,dest_lon";
  if (dispatch) out << ",dispatch_lat,dispatch_lon";
  out << '\n';
  auto ts = [](const std::optional<Timestamp>& t) { return t ? format_timestamp(*t) : std::string(); };
  auto real = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : records) {
    out << ts(r.create_time) << ',' << ts(r.match_time) << ',' << ts(r.pickup_time) << ',' << ts(r.finish_time) << ','
        << format_real(r.origin_lat) << ',' << format_real(r.origin_lon) << ',' << format_real(r.dest_lat) << ','
        << format_real(r.dest_lon);
    if (dispatch) out << ',' << real(r.dispatch_lat) << ',' << real(r.dispatch_lon);
    out << '\n';
  }
}

std::vector<OrderRecord> load_orders(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto header = csv::require_columns(
      table, {"create_time", "match_time", "pickup_time", "finish_time", "origin_lat", "origin_lon", "dest_lat",
              "dest_lon"},
      path.string());
  const bool dispatch = header.count("dispatch_lat") && header.count("dispatch_lon");
  std::vector<OrderRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    auto ts = [&](const char* name) -> std::optional<Timestamp> {
      const auto& cell = row[header.at(name)];
      if (cell.empty()) return std::nullopt;
      try {
        return parse_timestamp(cell);
      } catch (const DataFormatError& e) {
        throw DataFormatError(path.string() + ":" + std::to_string(line) + ": " + e.what());
      }
    };
    OrderRecord rec;
    rec.create_time = ts("create_time");
    rec.match_time = ts("match_time");
    rec.pickup_time = ts("pickup_time");
    rec.finish_time = ts("finish_time");
    rec.origin_lat = csv::to_real(row[header.at("origin_lat")], line, "origin_lat");
    rec.origin_lon = csv::to_real(row[header.at("origin_lon")], line, "origin_lon");
    rec.dest_lat = csv::to_real(row[header.at("dest_lat")], line, "dest_lat");
    rec.dest_lon = csv::to_real(row[header.at("dest_lon")], line, "dest_lon");
    if (dispatch) {
      if (!row[header.at("dispatch_lat")].empty()) {
        rec.dispatch_lat = csv::to_real(row[header.at("dispatch_lat")], line, "dispatch_lat");
      }
      if (!row[header.at("dispatch_lon")].empty()) {
        rec.dispatch_lon = csv::to_real(row[header.at("dispatch_lon")], line, "dispatch_lon");
      }
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace agpm
