#include "bipedkit/instruct.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bipedkit/retarget.hpp"
#include "bipedkit/text_io.hpp"

namespace bipedkit {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Lowercase with every whitespace run collapsed to one space.
std::string normalize_text(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool contains_phrase(const std::string& text, const std::string& phrase) {
  if (phrase.empty()) return false;
  for (std::size_t pos = text.find(phrase); pos != std::string::npos;
       pos = text.find(phrase, pos + 1)) {
    const std::size_t end = pos + phrase.size();
    const bool left_ok = pos == 0 || !word_char(text[pos - 1]);
    const bool right_ok = end == text.size() || !word_char(text[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

// "Calf-thigh joint" -> "calf_thigh_joint".
std::string normalize_label(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

struct Line {
  int number;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int n = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    lines.push_back({++n, trim(text.substr(pos, end - pos))});
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

// "Frame 3:" -> 3.
std::optional<int> frame_header(std::string_view line) {
  if (line.size() < 7 || lower(line.substr(0, 5)) != "frame" || line.back() != ':') {
    return std::nullopt;
  }
  const std::string_view digits = trim(line.substr(5, line.size() - 6));
  if (digits.empty() || digits.size() > 6 ||
      !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return std::stoi(std::string(digits));
}

struct LabeledLine {
  std::string label;
  std::string_view value;
};

std::optional<LabeledLine> labeled(std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  return LabeledLine{normalize_label(line.substr(0, colon)), trim(line.substr(colon + 1))};
}

// Shared frame/field walker: calls on_field(frame_no, label, value, line) and
// on_end(frame_no, line) when a frame closes.
template <class OnField, class OnEnd>
int walk_frames(std::string_view reply, OnField on_field, OnEnd on_end) {
  const auto lines = split_lines(reply);
  int current = 0;
  int last_line = lines.empty() ? 1 : lines.back().number;
  for (const auto& line : lines) {
    if (line.text.empty()) continue;
    if (auto n = frame_header(line.text)) {
      if (current > 0) on_end(current, line.number);
      if (*n != current + 1) {
        throw ParseError("expected 'Frame " + std::to_string(current + 1) + ":'", line.number, 1);
      }
      current = *n;
      continue;
    }
    if (current == 0) {
      throw ParseError("text before the first 'Frame 1:' header: '" + std::string(line.text) + "'",
                       line.number, 1);
    }
    auto field = labeled(line.text);
    if (!field) {
      throw ParseError("expected 'label: value', got '" + std::string(line.text) + "'",
                       line.number, 1);
    }
    on_field(current, *field, line.number);
  }
  if (current == 0) throw ParseError("reply contains no frames", last_line, 1);
  on_end(current, last_line);
  return current;
}

const std::array<const char*, 6> kFrontJointLabels = {
    "fl_hip_joint", "fl_thigh_joint", "fl_calf_joint",
    "fr_hip_joint", "fr_thigh_joint", "fr_calf_joint"};

std::string substitute(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = text.find(token); pos != std::string::npos;
         pos = text.find(token, pos + value.size())) {
      text.replace(pos, token.size(), value);
    }
  }
  return text;
}

std::string strip_comments(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    if (line.empty() || line.front() != '#') {
      out.append(line);
      out += '\n';
    }
    pos = end + 1;
  }
  const auto first = out.find_first_not_of('\n');
  if (first == std::string::npos) return {};
  out.erase(0, first);
  while (out.size() > 1 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') {
    out.pop_back();
  }
  return out;
}

std::string render_descriptions(const std::vector<KeyFrameDescription>& frames) {
  std::string out;
  for (const auto& f : frames) {
    out += "Frame " + std::to_string(f.index) + ":\n";
    for (const char* name : kDescriptionFields) out += std::string(name) + ": " + f.field(name) + "\n";
    out += "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_rules(const RuleSet& rules) {
  std::string out;
  for (const auto& r : rules.rules) out += "- " + r.describe() + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_limits(const RobotModel& model, const FrameLimits& limits) {
  std::string out = "v_x in [" + format_double(limits.v_min) + ", " + format_double(limits.v_max) +
                    "] m/s\n";
  for (int j : kFrontJointIndices) {
    const auto& l = model.limit(j);
    out += joint_name(j) + " in [" + format_double(l.min) + ", " + format_double(l.max) + "] rad\n";
  }
  out.pop_back();
  return out;
}

template <class Parse>
auto converse(ChatBackend& backend, const PromptSet& prompts, std::vector<ChatMessage>& transcript,
              std::string request, Parse parse) {
  transcript.push_back({"user", std::move(request)});
  std::string reply = backend.send(transcript);
  transcript.push_back({"assistant", reply});
  try {
    return parse(reply);
  } catch (const ParseError& e) {
    transcript.push_back({"user", substitute(prompts.correction, {{"error", e.what()}})});
    reply = backend.send(transcript);
    transcript.push_back({"assistant", reply});
    return parse(reply);
  }
}

}  // namespace

const std::string& KeyFrameDescription::field(std::string_view name) const {
  if (name == "base_velocity") return base_velocity;
  if (name == "hand_height") return hand_height;
  if (name == "hand_orientation") return hand_orientation;
  if (name == "calf_thigh_joint") return calf_thigh_joint;
  if (name == "relation_to_previous") return relation_to_previous;
  throw InputError("unknown key-frame field '" + std::string(name) + "'");
}

bool KinematicRule::matches(const KeyFrameDescription& d) const {
  std::string text;
  if (field.empty()) {
    for (const char* name : kDescriptionFields) text += normalize_text(d.field(name)) + " | ";
  } else {
    text = normalize_text(d.field(field));
  }
  for (const auto& p : all_of) {
    if (!contains_phrase(text, normalize_text(p))) return false;
  }
  if (any_of.empty()) return true;
  return std::any_of(any_of.begin(), any_of.end(),
                     [&](const std::string& p) { return contains_phrase(text, normalize_text(p)); });
}

std::string KinematicRule::describe() const {
  std::string cond;
  auto quoted = [](const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + ("\"" + v[i] + "\"");
    return s;
  };
  if (!all_of.empty()) cond += quoted(all_of, " and ");
  if (!any_of.empty()) cond += (cond.empty() ? "" : " and ") + quoted(any_of, " or ");
  return "if the " + (field.empty() ? std::string("description") : field) + " says " + cond +
         ", then set " + joint_name(joint) + " within range (" + format_double(lo) + "," +
         format_double(hi) + ") radians";
}

RuleSet RuleSet::parse(std::string_view text, const RobotModel& model, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(source + ": invalid JSON: " + e.what());
  }
  auto fail = [&](const std::string& why) { throw InputError(source + ": " + why); };
  if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) fail("missing 'rules' array");
  if (j.value("version", 0) != 1) fail("unsupported rules version");
  RuleSet set;
  std::set<std::string> ids;
  for (const auto& r : j["rules"]) {
    KinematicRule rule;
    try {
      rule.id = r.at("id").get<std::string>();
      rule.field = r.value("field", std::string());
      rule.all_of = r.value("all_of", std::vector<std::string>{});
      rule.any_of = r.value("any_of", std::vector<std::string>{});
      const auto joint = parse_joint_name(r.at("joint").get<std::string>());
      if (!joint) fail("rule '" + rule.id + "': unknown joint");
      rule.joint = *joint;
      const auto interval = r.at("interval").get<std::vector<double>>();
      if (interval.size() != 2) fail("rule '" + rule.id + "': interval needs two numbers");
      rule.lo = interval[0];
      rule.hi = interval[1];
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed rule: ") + e.what());
    }
    if (rule.id.empty() || !ids.insert(rule.id).second) fail("rule ids must be unique and non-empty");
    if (!rule.field.empty() &&
        std::find_if(kDescriptionFields.begin(), kDescriptionFields.end(), [&](const char* f) {
          return rule.field == f;
        }) == kDescriptionFields.end()) {
      fail("rule '" + rule.id + "': unknown field '" + rule.field + "'");
    }
    if (rule.all_of.empty() && rule.any_of.empty()) fail("rule '" + rule.id + "' has no condition");
    const auto& lim = model.limit(rule.joint);
    if (!(rule.lo < rule.hi && rule.lo >= lim.min && rule.hi <= lim.max)) {
      throw ValidationError(source + ": rule '" + rule.id + "' interval must lie within " +
                            joint_name(rule.joint) + " limits [" + format_double(lim.min) + ", " +
                            format_double(lim.max) + "]");
    }
    set.rules.push_back(std::move(rule));
  }
  return set;
}

RuleSet RuleSet::load(const std::filesystem::path& path, const RobotModel& model) {
  return parse(read_file(path), model, path.string());
}

FrameLimits FrameLimits::from_curriculum(const CurriculumConfig& cfg) {
  if (cfg.vel_bins.empty()) throw ValidationError("curriculum has no velocity bins");
  const auto [lo, hi] = std::minmax_element(cfg.vel_bins.begin(), cfg.vel_bins.end());
  return {*lo, *hi};
}

std::vector<Violation> validate_frame(const NumericKeyFrame& frame,
                                      const KeyFrameDescription* description,
                                      const RuleSet& rules, const RobotModel& model,
                                      const FrameLimits& limits) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < kFrontJointIndices.size(); ++i) {
    const int j = kFrontJointIndices[i];
    const double q = frame.front_joints[i];
    const auto& l = model.limit(j);
    if (!(q >= l.min && q <= l.max)) {
      out.push_back({"joint_limit", joint_name(j) + " = " + format_double(q) + " outside limits [" +
                                        format_double(l.min) + ", " + format_double(l.max) + "]"});
    }
  }
  if (!(frame.v_x >= limits.v_min && frame.v_x <= limits.v_max)) {
    out.push_back({"velocity_bound", "v_x = " + format_double(frame.v_x) + " outside [" +
                                         format_double(limits.v_min) + ", " +
                                         format_double(limits.v_max) + "]"});
  }
  if (!std::isfinite(frame.heading_des)) {
    out.push_back({"heading", "heading is not finite"});
  }
  if (!(frame.duration > 0 && std::isfinite(frame.duration))) {
    out.push_back({"duration", "duration = " + format_double(frame.duration) + " must be > 0"});
  }
  if (description) {
    for (const auto& rule : rules.rules) {
      if (!rule.matches(*description)) continue;
      const auto it = std::find(kFrontJointIndices.begin(), kFrontJointIndices.end(), rule.joint);
      if (it == kFrontJointIndices.end()) continue;
      const double q = frame.front_joints[static_cast<std::size_t>(it - kFrontJointIndices.begin())];
      if (!(q > rule.lo && q < rule.hi)) {
        out.push_back({rule.id, joint_name(rule.joint) + " = " + format_double(q) + " outside (" +
                                    format_double(rule.lo) + ", " + format_double(rule.hi) + ")"});
      }
    }
  }
  return out;
}

FrameRejected::FrameRejected(int frame_, std::vector<Violation> v)
    : ValidationError([&] {
        std::string msg = "key frame " + std::to_string(frame_) + " rejected:";
        for (const auto& x : v) msg += " [" + x.rule + "] " + x.message + ";";
        msg.pop_back();
        return msg;
      }()),
      frame(frame_),
      violations(std::move(v)) {}

std::vector<KeyFrameDescription> parse_descriptions(std::string_view reply) {
  std::vector<KeyFrameDescription> frames;
  std::set<std::string> seen;
  walk_frames(
      reply,
      [&](int n, const LabeledLine& f, int line) {
        if (frames.size() < static_cast<std::size_t>(n)) {
          frames.emplace_back();
          frames.back().index = n;
          seen.clear();
        }
        auto& d = frames.back();
        std::string* slot = nullptr;
        if (f.label == "base_velocity") slot = &d.base_velocity;
        if (f.label == "hand_height") slot = &d.hand_height;
        if (f.label == "hand_orientation") slot = &d.hand_orientation;
        if (f.label == "calf_thigh_joint") slot = &d.calf_thigh_joint;
        if (f.label == "relation_to_previous" || f.label == "relationship_with_previous_frame" ||
            f.label == "relation_to_previous_frame") {
          slot = &d.relation_to_previous;
        }
        if (!slot) throw ParseError("unknown field '" + f.label + "'", line, 1);
        if (!seen.insert(f.label).second) throw ParseError("duplicate field '" + f.label + "'", line, 1);
        if (f.value.empty()) throw ParseError("field '" + f.label + "' is empty", line, 1);
        *slot = std::string(f.value);
      },
      [&](int n, int line) {
        if (frames.size() < static_cast<std::size_t>(n)) {
          throw ParseError("frame " + std::to_string(n) + " has no fields", line, 1);
        }
        for (const char* name : kDescriptionFields) {
          if (frames.back().field(name).empty()) {
            throw ParseError("frame " + std::to_string(n) + " is missing field '" + name + "'", line,
                             1);
          }
        }
      });
  return frames;
}

std::vector<NumericKeyFrame> parse_numeric_frames(std::string_view reply, double default_duration) {
  std::vector<NumericKeyFrame> frames;
  std::set<std::string> seen;
  walk_frames(
      reply,
      [&](int n, const LabeledLine& f, int line) {
        if (frames.size() < static_cast<std::size_t>(n)) {
          frames.emplace_back();
          frames.back().index = n;
          frames.back().duration = default_duration;
          seen.clear();
        }
        auto& k = frames.back();
        double* slot = nullptr;
        if (f.label == "v_x") slot = &k.v_x;
        if (f.label == "heading") slot = &k.heading_des;
        if (f.label == "duration") slot = &k.duration;
        for (std::size_t i = 0; i < kFrontJointLabels.size(); ++i) {
          if (f.label == kFrontJointLabels[i]) slot = &k.front_joints[i];
        }
        if (!slot) throw ParseError("unknown key '" + f.label + "'", line, 1);
        if (!seen.insert(f.label).second) throw ParseError("duplicate key '" + f.label + "'", line, 1);
        const auto value = parse_double(f.value);
        if (!value) {
          throw ParseError("key '" + f.label + "' needs a plain number, got '" +
                               std::string(f.value) + "'",
                           line, 1);
        }
        *slot = *value;
      },
      [&](int n, int line) {
        if (frames.size() < static_cast<std::size_t>(n)) {
          throw ParseError("frame " + std::to_string(n) + " has no values", line, 1);
        }
        std::vector<std::string> required = {"v_x", "heading"};
        required.insert(required.end(), kFrontJointLabels.begin(), kFrontJointLabels.end());
        for (const auto& key : required) {
          if (!seen.count(key)) {
            throw ParseError("frame " + std::to_string(n) + " is missing key '" + key + "'", line, 1);
          }
        }
      });
  return frames;
}

std::string instruction_slug(std::string_view instruction) {
  std::string out;
  for (char c : instruction) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

MockBackend::MockBackend(const std::filesystem::path& transcripts, std::string_view instruction)
    : dir_(transcripts / instruction_slug(instruction)) {
  if (instruction_slug(instruction).empty()) throw InputError("instruction is empty");
  if (!std::filesystem::is_directory(dir_)) {
    throw InputError("no mock transcript at " + dir_.string());
  }
}

std::string MockBackend::send(const std::vector<ChatMessage>& messages) {
  requests_.push_back(messages);
  const auto file = dir_ / ("reply_" + std::to_string(next_) + ".txt");
  if (!std::filesystem::exists(file)) {
    throw TransportError("mock transcript " + dir_.string() + " has no reply " +
                         std::to_string(next_));
  }
  ++next_;
  return read_file(file);
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  PromptSet p;
  p.round1 = strip_comments(read_file(dir / "round1.txt"));
  p.round2 = strip_comments(read_file(dir / "round2.txt"));
  p.correction = strip_comments(read_file(dir / "correction.txt"));
  if (p.round1.find("{instruction}") == std::string::npos) {
    throw InputError((dir / "round1.txt").string() + ": missing {instruction} placeholder");
  }
  if (p.round2.find("{frames}") == std::string::npos) {
    throw InputError((dir / "round2.txt").string() + ": missing {frames} placeholder");
  }
  return p;
}

PromptSet PromptSet::builtin() {
  return load(std::filesystem::path(BIPEDKIT_ASSET_DIR) / "prompts");
}

std::vector<KeyFrameDescription> decompose(std::string_view instruction, ChatBackend& backend,
                                           const PromptSet& prompts,
                                           std::vector<ChatMessage>& transcript) {
  if (trim(instruction).empty()) throw InputError("instruction is empty");
  const std::string request =
      substitute(prompts.round1, {{"instruction", std::string(trim(instruction))}});
  return converse(backend, prompts, transcript, request,
                  [](const std::string& reply) { return parse_descriptions(reply); });
}

std::vector<NumericKeyFrame> formalize(const std::vector<KeyFrameDescription>& frames,
                                       ChatBackend& backend, const PromptSet& prompts,
                                       const RuleSet& rules, const RobotModel& model,
                                       std::vector<ChatMessage>& transcript,
                                       const FrameLimits& limits, double default_duration) {
  if (frames.empty()) throw InputError("formalize needs at least one key frame");
  const std::string request = substitute(prompts.round2, {{"frames", render_descriptions(frames)},
                                                          {"rules", render_rules(rules)},
                                                          {"limits", render_limits(model, limits)}});
  auto numeric = converse(backend, prompts, transcript, request, [&](const std::string& reply) {
    auto parsed = parse_numeric_frames(reply, default_duration);
    if (parsed.size() != frames.size()) {
      throw ParseError("reply has " + std::to_string(parsed.size()) + " frames, expected " +
                           std::to_string(frames.size()),
                       static_cast<int>(split_lines(reply).size()), 1);
    }
    return parsed;
  });
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    auto violations = validate_frame(numeric[i], &frames[i], rules, model, limits);
    if (!violations.empty()) throw FrameRejected(numeric[i].index, std::move(violations));
  }
  return numeric;
}

TargetTrack frames_to_track(const std::vector<NumericKeyFrame>& frames, const RobotModel& model,
                            double period, const CurriculumConfig& yaw) {
  if (frames.empty()) throw InputError("no key frames");
  if (!(period > 0 && std::isfinite(period))) throw InputError("track period must be > 0");
  std::vector<std::array<Vec3, 2>> toes;
  std::vector<double> starts;
  double t_end = 0.0;
  for (const auto& f : frames) {
    const LegAngles fl = {f.front_joints[0], f.front_joints[1], f.front_joints[2]};
    const LegAngles fr = {f.front_joints[3], f.front_joints[4], f.front_joints[5]};
    toes.push_back({forward_kinematics_toe(model, Leg::FL, fl),
                    forward_kinematics_toe(model, Leg::FR, fr)});
    starts.push_back(t_end);
    t_end += f.duration;
  }

  TargetTrack track;
  double heading = 0.0;
  std::size_t k = 0;
  for (long n = 0;; ++n) {
    const double t = static_cast<double>(n) * period;
    if (t > t_end + 1e-9) break;
    while (k + 1 < frames.size() && t >= starts[k + 1] - 1e-12) ++k;
    const auto& f = frames[k];
    TargetRow row;
    row.t = t;
    row.source = f.index;
    row.target.v_x = f.v_x;
    row.target.heading_des = f.heading_des;
    row.target.yaw_rate_obs = yaw_rate_observation(heading, f.heading_des, yaw);
    if (k + 1 < frames.size()) {
      const double local = clamp(t - starts[k], 0.0, f.duration);
      const auto lerp = interpolate_toe_targets(toes[k], toes[k + 1], local, f.duration);
      row.target.toe_des = {clamp_to_workspace(model, Leg::FL, lerp[0]),
                            clamp_to_workspace(model, Leg::FR, lerp[1])};
    } else {
      row.target.toe_des = toes[k];
    }
    track.rows.push_back(row);
    heading = wrap_angle(heading + row.target.yaw_rate_obs * period);
  }
  return track;
}

InstructResult run_instruct(std::string_view instruction, ChatBackend& backend,
                            const PromptSet& prompts, const RuleSet& rules,
                            const RobotModel& model, const InstructOptions& options) {
  InstructResult r;
  r.descriptions = decompose(instruction, backend, prompts, r.transcript);
  r.frames = formalize(r.descriptions, backend, prompts, rules, model, r.transcript, options.limits,
                       options.default_duration);
  r.track = frames_to_track(r.frames, model, options.period);
  return r;
}

}  // namespace bipedkit
