#include "segfp/llm_advisor.h"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <optional>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "segfp/error.h"
#include "segfp/util.h"

namespace segfp {
namespace {

const std::array<std::string, kQuestionCount> kQuestions{
    "What segment duration best balances temporal resolution and discriminative power in this setup?",
    "When audio segments are affected by background noise and small time shifts, what segment duration yields "
    "the most stable fingerprints without losing detail?",
    "In a large-scale contrastive audio fingerprinting system, what segment duration provides the best "
    "trade-off between retrieval accuracy, speed, and storage cost?",
    "In a large-scale contrastive system, what duration provides the best trade-off between accuracy, speed, "
    "and storage cost?",
    "When training with fixed-duration segments but testing with variable-duration queries, which segment "
    "duration generalizes best across query lengths?",
};

constexpr double kMaxSeconds = 60.0;

// ASCII view of the response with dash and space variants folded, plus the
// byte offset in the original text of every folded character.
struct Folded {
  std::string text;
  std::vector<std::size_t> origin;  // origin[i] = source byte of text[i]; origin[size] = end
};

Folded fold(std::string_view s) {
  Folded f;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    const std::string_view ch = s.substr(i, len);
    // U+2010..U+2015 hyphens and dashes, U+2212 minus
    const bool dash = (ch.size() == 3 && ch[0] == '\xE2' && ch[1] == '\x80' &&
                       static_cast<unsigned char>(ch[2]) >= 0x90 && static_cast<unsigned char>(ch[2]) <= 0x95) ||
                      ch == "\xE2\x88\x92";
    const bool space = ch == "\xC2\xA0" || ch == "\xE2\x80\xAF" || ch == "\xE2\x80\x89";
    if (dash || space) {
      f.text.push_back(dash ? '-' : ' ');
      f.origin.push_back(i);
    } else {
      for (std::size_t k = 0; k < len; ++k) {
        f.text.push_back(ch[k]);
        f.origin.push_back(i + k);
      }
    }
    i += len;
  }
  f.origin.push_back(s.size());
  return f;
}

const std::regex& range_pattern() {
  static const std::regex re(R"((\d+(?:\.\d+)?)\s*(?:-|to)\s*(\d+(?:\.\d+)?)\s*-?\s*(?:seconds?|secs?|s)\b)",
                             std::regex::icase);
  return re;
}

const std::regex& point_pattern() {
  static const std::regex re(R"((\d+(?:\.\d+)?)\s*-?\s*(?:seconds?|secs?|s)\b)", std::regex::icase);
  return re;
}

struct Match {
  double lo = 0.0, hi = 0.0;
  std::size_t begin = 0, end = 0;  // in folded text
};

bool plausible(double lo, double hi) { return lo > 0.0 && lo <= hi && hi <= kMaxSeconds; }

std::optional<Match> first_match(const std::string& text, std::size_t from, std::size_t to, bool ranges) {
  const auto first = text.begin() + static_cast<std::ptrdiff_t>(from);
  const auto last = text.begin() + static_cast<std::ptrdiff_t>(to);
  const std::regex& re = ranges ? range_pattern() : point_pattern();
  for (std::sregex_iterator it(first, last, re), end; it != end; ++it) {
    const auto& m = *it;
    const double lo = std::stod(m[1].str());
    const double hi = ranges ? std::stod(m[2].str()) : lo;
    if (!plausible(lo, hi)) continue;
    const auto begin = static_cast<std::size_t>(m[0].first - text.begin());
    return Match{lo, hi, begin, begin + static_cast<std::size_t>(m.length(0))};
  }
  return std::nullopt;
}

std::optional<Match> first_duration(const std::string& text, std::size_t from, std::size_t to) {
  if (auto m = first_match(text, from, to, true)) return m;
  return first_match(text, from, to, false);
}

// Emphasised spans and labelled recommendation lines, in text order.
std::vector<std::pair<std::size_t, std::size_t>> highlighted_regions(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> regions;
  static const std::regex emphasis(R"(\*\*([^*]+)\*\*|__([^_]+)__)");
  for (std::sregex_iterator it(text.begin(), text.end(), emphasis), end; it != end; ++it) {
    const int group = (*it)[1].matched ? 1 : 2;
    const auto begin = static_cast<std::size_t>((*it)[group].first - text.begin());
    regions.emplace_back(begin, begin + static_cast<std::size_t>((*it).length(group)));
  }
  static const std::regex label(R"((?:^|\n)[ \t#>*-]*(?:recommend\w*|answer|optimal\s+\w+|bottom line)\s*:([^\n]*))",
                                std::regex::icase);
  for (std::sregex_iterator it(text.begin(), text.end(), label), end; it != end; ++it) {
    const auto begin = static_cast<std::size_t>((*it)[1].first - text.begin());
    regions.emplace_back(begin, begin + static_cast<std::size_t>((*it).length(1)));
  }
  std::sort(regions.begin(), regions.end());
  return regions;
}

}  // namespace

const std::string& prompt_context() {
  static const std::string kContext =
      "Segment duration refers to the duration of each fixed-length audio segment measured in seconds in a "
      "contrastive neural audio fingerprinting model designed for high-specific retrieval. The model generates "
      "one embedding per segment, which is later used for similarity-based matching in a large-scale music "
      "database.\n\n"
      "Dataset context: Training uses 30-second clips from the Free Music Archive (FMA) dataset with strict "
      "train, validation, and test splits. Evaluation involves large-scale retrieval, where each track in the "
      "database is segmented into fixed windows and the query is matched by nearest-neighbor search in the "
      "embedding space.\n\n"
      "Example: Consider 1-second segments with a 0.5-second hop capturing a short melodic phrase or drum "
      "pattern used to identify its source track in a large database under background noise and small time "
      "shifts.";
  return kContext;
}

const std::string& question_text(int question_id) {
  if (question_id < 1 || question_id > kQuestionCount) {
    throw Error(ErrorCode::kUnknownQuestion, "question id " + std::to_string(question_id));
  }
  return kQuestions[static_cast<std::size_t>(question_id - 1)];
}

std::string build_prompt(int question_id) { return prompt_context() + "\n\n" + question_text(question_id); }

Recommendation parse_recommendation(std::string_view response) {
  const Folded f = fold(response);
  std::optional<Match> chosen;
  for (const auto& [begin, end] : highlighted_regions(f.text)) {
    if ((chosen = first_duration(f.text, begin, end))) break;
  }
  if (!chosen) chosen = first_match(f.text, 0, f.text.size(), true);
  if (!chosen) chosen = first_match(f.text, 0, f.text.size(), false);
  if (!chosen) throw Error(ErrorCode::kNoDurationFound, "no duration in response");

  const std::size_t b = f.origin[chosen->begin];
  const std::size_t e = f.origin[chosen->end];
  return Recommendation{chosen->lo, chosen->hi, std::string(response.substr(b, e - b))};
}

ModelSummary summarize_model(std::span<const Recommendation> recs) {
  if (recs.empty()) throw Error(ErrorCode::kInvalidInput, "no recommendations to summarise");
  ModelSummary s{recs[0].lo, recs[0].hi, false};
  for (const auto& r : recs) {
    s.lo = std::min(s.lo, r.lo);
    s.hi = std::max(s.hi, r.hi);
  }
  s.consistent = s.hi - s.lo <= kConsistencySpanSeconds;
  return s;
}

double interval_distance(double lo, double hi, double best_w) {
  if (best_w >= lo && best_w <= hi) return 0.0;
  return std::min(std::abs(best_w - lo), std::abs(best_w - hi));
}

double score_against_empirical(const Recommendation& rec, const HitReport& report) {
  return interval_distance(rec.lo, rec.hi, best_window(report));
}

ReplayClient::ReplayClient(std::filesystem::path replay_dir, std::string model)
    : dir_(std::move(replay_dir)), model_(std::move(model)) {}

std::string ReplayClient::send(const std::string& prompt) {
  for (int q = 1; q <= kQuestionCount; ++q) {
    if (build_prompt(q) == prompt) return send_question(q);
  }
  throw Error(ErrorCode::kMissingReplayFile, "prompt does not match any known question");
}

std::string ReplayClient::send_question(int question_id) {
  question_text(question_id);
  const auto path = dir_ / model_ / (std::to_string(question_id) + ".txt");
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kMissingReplayFile, path.string());
  }
  return read_file(path);
}

HttpChatClient::HttpChatClient(std::string api_base, std::string model, std::string api_key,
                               std::chrono::seconds timeout)
    : base_(std::move(api_base)), model_(std::move(model)), key_(std::move(api_key)), timeout_(timeout) {
  while (!base_.empty() && base_.back() == '/') base_.pop_back();
}

HttpChatClient HttpChatClient::from_env() {
  auto need = [](const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) throw Error(ErrorCode::kConfigError, std::string(name) + " is not set");
    return std::string(v);
  };
  const char* key = std::getenv("ADVISOR_API_KEY");
  return HttpChatClient(need("ADVISOR_API_BASE"), need("ADVISOR_MODEL"), key ? key : "");
}

std::string HttpChatClient::send(const std::string& prompt) {
  const auto scheme_end = base_.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kConfigError, "API base needs a scheme: " + base_);
  const auto path_start = base_.find('/', scheme_end + 3);
  const std::string origin = base_.substr(0, path_start);
  const std::string path = (path_start == std::string::npos ? std::string() : base_.substr(path_start)) +
                           "/chat/completions";

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers headers;
  if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
  const nlohmann::json body = {{"model", model_},
                               {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::kTransportError, "request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorCode::kTransportError, "HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTransportError, std::string("unexpected response body: ") + e.what());
  }
}

}  // namespace segfp
