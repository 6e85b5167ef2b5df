#include "bipedkit/motion_target.hpp"

#include <limits>

namespace bipedkit {

std::vector<std::string> target_track_columns() {
  return {"t",    "v_x",  "v_y",  "heading_des", "yaw_rate_obs", "fl_x",
          "fl_y", "fl_z", "fr_x", "fr_y",        "fr_z",         "source"};
}

CsvTable TargetTrack::to_table() const {
  CsvTable table;
  table.header = target_track_columns();
  table.rows.reserve(rows.size());
  for (const auto& r : rows) {
    const auto& m = r.target;
    table.rows.push_back({r.t, m.v_x, m.v_y, m.heading_des, m.yaw_rate_obs, m.toe_des[0].x(),
                          m.toe_des[0].y(), m.toe_des[0].z(), m.toe_des[1].x(), m.toe_des[1].y(),
                          m.toe_des[1].z(), static_cast<double>(r.source)});
  }
  return table;
}

std::string TargetTrack::to_csv() const { return bipedkit::to_csv(to_table()); }

TargetTrack TargetTrack::from_table(const CsvTable& table) {
  const auto names = target_track_columns();
  std::array<std::size_t, 11> idx{};
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = table.column(names[i]);
  const auto source_col = table.find_column("source");

  TargetTrack track;
  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    TargetRow out;
    out.t = row[idx[0]];
    if (!(out.t > last_t)) {
      throw ParseError("target track timestamps must be strictly increasing",
                       static_cast<int>(r) + 2, static_cast<int>(idx[0]) + 1);
    }
    last_t = out.t;
    out.target.v_x = row[idx[1]];
    out.target.v_y = row[idx[2]];
    out.target.heading_des = row[idx[3]];
    out.target.yaw_rate_obs = row[idx[4]];
    out.target.toe_des[0] = Vec3(row[idx[5]], row[idx[6]], row[idx[7]]);
    out.target.toe_des[1] = Vec3(row[idx[8]], row[idx[9]], row[idx[10]]);
    if (source_col) out.source = static_cast<int>(row[*source_col]);
    track.rows.push_back(out);
  }
  return track;
}

TargetTrack TargetTrack::parse(std::string_view text) { return from_table(parse_csv(text)); }

TargetTrack TargetTrack::load(const std::filesystem::path& path) {
  return from_table(load_csv(path));
}

}  // namespace bipedkit
