#include "bipedkit/retarget.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "bipedkit/text_io.hpp"

namespace bipedkit {

namespace {

const Vec3& landmark(const SkeletonFrame& f, const char* name) {
  const auto it = f.landmarks.find(name);
  if (it == f.landmarks.end()) {
    throw InputError("skeleton frame at t=" + format_double(f.t) + " lacks landmark '" + name + "'");
  }
  return it->second;
}

}  // namespace

std::vector<SkeletonFrame> parse_skeleton_jsonl(std::string_view text, const std::string& source) {
  std::vector<SkeletonFrame> frames;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw ParseError(source + ": " + why, line_no, 1);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("t") || !j["t"].is_number()) fail("missing numeric 't'");
    if (!j.contains("landmarks") || !j["landmarks"].is_object()) fail("missing 'landmarks' object");
    SkeletonFrame f;
    f.t = j["t"].get<double>();
    if (!std::isfinite(f.t)) fail("non-finite timestamp");
    for (const auto& [name, value] : j["landmarks"].items()) {
      if (!value.is_array() || value.size() != 3 || !value[0].is_number() ||
          !value[1].is_number() || !value[2].is_number()) {
        fail("landmark '" + name + "' must be [x, y, z]");
      }
      const Vec3 p(value[0].get<double>(), value[1].get<double>(), value[2].get<double>());
      if (!p.allFinite()) fail("landmark '" + name + "' is not finite");
      f.landmarks[name] = p;
    }
    for (const char* name : kRequiredLandmarks) {
      if (!f.landmarks.count(name)) fail(std::string("frame lacks landmark '") + name + "'");
    }
    if (!frames.empty() && !(f.t > frames.back().t)) fail("timestamps must increase strictly");
    frames.push_back(std::move(f));
    if (end == text.size()) break;
  }
  return frames;
}

std::vector<SkeletonFrame> load_skeleton_jsonl(const std::filesystem::path& path) {
  return parse_skeleton_jsonl(read_file(path), path.string());
}

void RetargetConfig::validate() const {
  if (scale && !(*scale > 0 && std::isfinite(*scale))) {
    throw ValidationError("retarget scale must be > 0");
  }
  if (!(sample_period > 0 && std::isfinite(sample_period))) {
    throw ValidationError("retarget sample period must be > 0");
  }
}

BodyFrame body_frame(const SkeletonFrame& frame) {
  const Vec3& ls = landmark(frame, "left_shoulder");
  const Vec3& rs = landmark(frame, "right_shoulder");
  const Vec3& lh = landmark(frame, "left_hip");
  const Vec3& rh = landmark(frame, "right_hip");
  const Vec3 across = ls - rs;
  if (across.norm() < 1e-9) throw InputError("degenerate skeleton: shoulders coincide");
  const Vec3 y = across.normalized();
  const Vec3 mid_shoulder = 0.5 * (ls + rs);
  const Vec3 spine = mid_shoulder - 0.5 * (lh + rh);
  const Vec3 up = spine - spine.dot(y) * y;
  if (up.norm() < 1e-9) throw InputError("degenerate skeleton: spine parallel to shoulders");
  const Vec3 z = up.normalized();
  BodyFrame b;
  b.origin = mid_shoulder;
  b.axes.col(0) = y.cross(z);
  b.axes.col(1) = y;
  b.axes.col(2) = z;
  return b;
}

std::array<Vec3, 2> wrist_relative(const SkeletonFrame& frame) {
  const BodyFrame b = body_frame(frame);
  return {b.axes.transpose() * (landmark(frame, "left_wrist") - b.origin),
          b.axes.transpose() * (landmark(frame, "right_wrist") - b.origin)};
}

Vec3 retarget_reference(const RobotModel& model) {
  return 0.5 * (model.leg(Leg::FL).mount + model.leg(Leg::FR).mount);
}

Vec3 human_to_robot_axes(const Vec3& p) { return {p.z(), p.y(), -p.x()}; }

Vec3 clamp_to_workspace(const RobotModel& model, Leg leg, const Vec3& p) {
  const WorkspaceProjection proj = project_to_workspace(model, leg, p);
  return proj.distance <= 1e-8 ? p : proj.goal.position;
}

Vec3 scale_to_robot(const Vec3& p_human, double scale, const RobotModel& model, Leg leg) {
  return clamp_to_workspace(model, leg,
                            retarget_reference(model) + scale * human_to_robot_axes(p_human));
}

double estimate_scale(const std::vector<SkeletonFrame>& frames, const RobotModel& model) {
  double reach = 0.0;
  for (const auto& f : frames) {
    reach = std::max(reach, (landmark(f, "left_wrist") - landmark(f, "left_shoulder")).norm());
    reach = std::max(reach, (landmark(f, "right_wrist") - landmark(f, "right_shoulder")).norm());
  }
  if (!(reach > 1e-6)) throw InputError("cannot estimate scale: wrists never leave the shoulders");
  return model.chain_length(Leg::FL) / reach;
}

TargetTrack build_track(const std::vector<SkeletonFrame>& frames, const RetargetConfig& cfg,
                        const RobotModel& model) {
  cfg.validate();
  if (frames.size() < 2) throw InputError("retarget needs at least two skeleton frames");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].t > frames[i - 1].t)) throw InputError("skeleton timestamps must increase");
  }
  const double scale = cfg.scale ? *cfg.scale : estimate_scale(frames, model);
  std::vector<std::array<Vec3, 2>> wrists;
  wrists.reserve(frames.size());
  for (const auto& f : frames) wrists.push_back(wrist_relative(f));

  const double t0 = frames.front().t;
  const double span = frames.back().t - t0;
  TargetTrack track;
  std::size_t seg = 0;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.sample_period;
    if (t > span + 1e-9) break;
    const double abs_t = t0 + t;
    while (seg + 2 < frames.size() && frames[seg + 1].t <= abs_t) ++seg;
    const double a = frames[seg].t, b = frames[seg + 1].t;
    const double w = clamp((abs_t - a) / (b - a), 0.0, 1.0);
    TargetRow row;
    row.t = t;
    row.source = static_cast<int>(k);
    for (std::size_t side = 0; side < 2; ++side) {
      const Vec3 p = (1.0 - w) * wrists[seg][side] + w * wrists[seg + 1][side];
      row.target.toe_des[side] = scale_to_robot(p, scale, model, side == 0 ? Leg::FL : Leg::FR);
    }
    track.rows.push_back(row);
  }
  return track;
}

}  // namespace bipedkit
