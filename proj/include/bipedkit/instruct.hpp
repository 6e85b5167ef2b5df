#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "bipedkit/motion_target.hpp"
#include "bipedkit/robot_model.hpp"
#include "bipedkit/target_gen.hpp"

namespace bipedkit {

struct KeyFrameDescription {
  int index = 0;  // 1-based, as numbered in the reply
  std::string base_velocity;
  std::string hand_height;
  std::string hand_orientation;
  std::string calf_thigh_joint;
  std::string relation_to_previous;

  /// Text of a named field ("hand_orientation", ...).
  const std::string& field(std::string_view name) const;
};

/// Field labels of a round-1 frame, in the order they must appear.
inline constexpr std::array<const char*, 5> kDescriptionFields = {
    "base_velocity", "hand_height", "hand_orientation", "calf_thigh_joint",
    "relation_to_previous"};

/// JointVector indices of NumericKeyFrame::front_joints (FL then FR, each hip, thigh, calf).
inline constexpr std::array<int, 6> kFrontJointIndices = {0, 1, 2, 3, 4, 5};

struct NumericKeyFrame {
  int index = 0;
  double v_x = 0.0;          // m/s
  double heading_des = 0.0;  // rad
  std::array<double, 6> front_joints{};
  double duration = 1.0;  // s
  bool operator==(const NumericKeyFrame&) const = default;
};

/// A joint interval enforced when a description matches. Phrases match
/// case-insensitively on whole words of one description field (all fields
/// when `field` is empty), with runs of whitespace treated as one space.
/// Every `all_of` phrase must occur and, when `any_of` is non-empty, at least
/// one of its phrases.
struct KinematicRule {
  std::string id;
  std::string field;
  std::vector<std::string> all_of;
  std::vector<std::string> any_of;
  int joint = 0;  // JointVector index
  double lo = 0.0, hi = 0.0;  // open interval (lo, hi)

  bool matches(const KeyFrameDescription& d) const;
  /// Plain-language rendering used in the round-2 prompt.
  std::string describe() const;
};

struct RuleSet {
  std::vector<KinematicRule> rules;

  /// JSON: {"version": 1, "rules": [{"id", "field", "all_of", "any_of",
  /// "joint": "FL_hip_joint", "interval": [lo, hi]}]}. Intervals must lie
  /// within the joint limits.
  static RuleSet parse(std::string_view text, const RobotModel& model,
                       const std::string& source = "<memory>");
  static RuleSet load(const std::filesystem::path& path, const RobotModel& model);
};

struct Violation {
  std::string rule;  // rule id, "joint_limit" or "velocity_bound"
  std::string message;
};

struct FrameLimits {
  double v_min = -0.3, v_max = 0.3;  // m/s

  static FrameLimits from_curriculum(const CurriculumConfig& cfg);
};

/// Joint limits, velocity bound and every rule whose condition matches the
/// paired description. Empty when the frame is acceptable.
std::vector<Violation> validate_frame(const NumericKeyFrame& frame,
                                      const KeyFrameDescription* description,
                                      const RuleSet& rules, const RobotModel& model,
                                      const FrameLimits& limits = {});

/// Raised when a formalized frame breaks a constraint; the message cites
/// each violation.
struct FrameRejected : public ValidationError {
  int frame = 0;
  std::vector<Violation> violations;
  FrameRejected(int frame_, std::vector<Violation> v);
};

/// Strict line grammars for both reply rounds. Blank lines are ignored;
/// every other line must be a frame header "Frame N:" or a "label: value"
/// line belonging to the current frame.
std::vector<KeyFrameDescription> parse_descriptions(std::string_view reply);
std::vector<NumericKeyFrame> parse_numeric_frames(std::string_view reply,
                                                  double default_duration = 1.0);

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Blocking call; throws TransportError on failure or timeout.
  virtual std::string send(const std::vector<ChatMessage>& messages) = 0;
};

/// Replays reply_1.txt, reply_2.txt, ... from <dir>/<slug(instruction)>/.
class MockBackend : public ChatBackend {
 public:
  MockBackend(const std::filesystem::path& transcripts, std::string_view instruction);
  std::string send(const std::vector<ChatMessage>& messages) override;
  const std::filesystem::path& directory() const { return dir_; }
  const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }

 private:
  std::filesystem::path dir_;
  int next_ = 1;
  std::vector<std::vector<ChatMessage>> requests_;
};

/// "Wave left hand!" -> "wave_left_hand".
std::string instruction_slug(std::string_view instruction);

struct HttpBackendConfig {
  std::string endpoint;  // full URL of a chat-completions route
  std::string model;
  std::string api_key;
  double timeout = 60.0;  // s per attempt
  int retries = 1;        // extra attempts after a transport failure
  double temperature = 0.0;

  /// BIPEDKIT_LLM_ENDPOINT, BIPEDKIT_LLM_MODEL, BIPEDKIT_LLM_API_KEY.
  static HttpBackendConfig from_env();
};

/// Chat-completions wire format over HTTP(S).
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  std::string send(const std::vector<ChatMessage>& messages) override;

 private:
  HttpBackendConfig cfg_;
};

/// Prompt templates with {instruction}, {frames}, {rules}, {limits} and
/// {error} placeholders. Lines starting with '#' are comments and never sent.
struct PromptSet {
  std::string round1;
  std::string round2;
  std::string correction;

  /// round1.txt, round2.txt and correction.txt.
  static PromptSet load(const std::filesystem::path& dir);
  static PromptSet builtin();  // the shipped assets/prompts directory
};

/// Round one. A reply that fails the grammar is answered with the correction
/// prompt once; a second failure propagates the ParseError.
std::vector<KeyFrameDescription> decompose(std::string_view instruction, ChatBackend& backend,
                                           const PromptSet& prompts,
                                           std::vector<ChatMessage>& transcript);
/// Round two, continuing the same conversation. Grammar failures and count
/// mismatches get one correction; a constraint violation throws
/// FrameRejected immediately.
std::vector<NumericKeyFrame> formalize(const std::vector<KeyFrameDescription>& frames,
                                       ChatBackend& backend, const PromptSet& prompts,
                                       const RuleSet& rules, const RobotModel& model,
                                       std::vector<ChatMessage>& transcript,
                                       const FrameLimits& limits = {},
                                       double default_duration = 1.0);

/// Key frame k starts at the sum of the earlier durations; toe targets move
/// affinely from FK of frame k to FK of frame k+1 and the last frame is held
/// to the end. Blended points that leave the reachable workspace are
/// projected back onto it. Rows every `period` seconds carry the active
/// frame's index; yaw_rate_obs follows the heading integrated from zero.
TargetTrack frames_to_track(const std::vector<NumericKeyFrame>& frames, const RobotModel& model,
                            double period = 0.02, const CurriculumConfig& yaw = {});

struct InstructResult {
  std::vector<KeyFrameDescription> descriptions;
  std::vector<NumericKeyFrame> frames;
  TargetTrack track;
  std::vector<ChatMessage> transcript;
};

struct InstructOptions {
  FrameLimits limits;
  double default_duration = 1.0;
  double period = 0.02;
};

InstructResult run_instruct(std::string_view instruction, ChatBackend& backend,
                            const PromptSet& prompts, const RuleSet& rules,
                            const RobotModel& model, const InstructOptions& options = {});

}  // namespace bipedkit
