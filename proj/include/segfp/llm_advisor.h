#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segfp/eval_harness.h"

namespace segfp {

inline constexpr int kQuestionCount = 5;
// Summary spans up to this width (seconds) count as a consistent model.
inline constexpr double kConsistencySpanSeconds = 2.0;

const std::string& prompt_context();
const std::string& question_text(int question_id);
// Context, blank line, question. Throws UnknownQuestion outside 1..5.
std::string build_prompt(int question_id);

struct Recommendation {
  double lo = 0.0;  // seconds, 0 < lo <= hi
  double hi = 0.0;
  std::string raw_span;  // substring of the response that was parsed

  bool operator==(const Recommendation&) const = default;
};

// Finds the recommended duration. Precedence: a duration inside an
// emphasised span (**...** / __...__) or a labelled recommendation line,
// then the first range in the text, then the first single value. En/em
// dashes, non-breaking hyphens and "to" all separate ranges. Throws
// NoDurationFound.
Recommendation parse_recommendation(std::string_view response);

struct ModelSummary {
  double lo = 0.0;
  double hi = 0.0;
  bool consistent = false;
};

ModelSummary summarize_model(std::span<const Recommendation> recs);

// Distance (seconds) from the interval to the empirically best W, zero when
// the interval contains it.
double interval_distance(double lo, double hi, double best_w);
double score_against_empirical(const Recommendation& rec, const HitReport& report);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string send(const std::string& prompt) = 0;
};

// Serves replays/<model>/<question_id>.txt; the question is recognised by
// matching the prompt against build_prompt.
class ReplayClient : public LlmClient {
 public:
  ReplayClient(std::filesystem::path replay_dir, std::string model);
  std::string send(const std::string& prompt) override;
  std::string send_question(int question_id);

 private:
  std::filesystem::path dir_;
  std::string model_;
};

// Single request to an OpenAI-style chat completions endpoint:
// POST <base>/chat/completions, bearer token auth, no retries.
class HttpChatClient : public LlmClient {
 public:
  HttpChatClient(std::string api_base, std::string model, std::string api_key,
                 std::chrono::seconds timeout = std::chrono::seconds(120));
  // Reads ADVISOR_API_BASE, ADVISOR_API_KEY and ADVISOR_MODEL.
  static HttpChatClient from_env();
  std::string send(const std::string& prompt) override;

 private:
  std::string base_;
  std::string model_;
  std::string key_;
  std::chrono::seconds timeout_;
};

}  // namespace segfp
