#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace smnas {

using json = nlohmann::json;

// Append-only run log. One JSON object per line; entry_type is one of
// "config_snapshot", "record" (upserts by id) or "stage_marker". Entries are
// flushed per append so a crash loses at most a torn final line, which
// replay truncates with a warning.
class Journal {
 public:
  struct Options {
    std::string path;                 // empty: in-memory only
    bool deterministic_clock = true;  // logical ticks instead of wall time
    int fail_after_appends = -1;      // testing failpoint; < 0 disables
  };

  struct Failpoint : std::runtime_error {
    Failpoint() : std::runtime_error("journal failpoint reached") {}
  };

  explicit Journal(Options options);

  void append(const json& entry);
  std::int64_t now();  // ms since epoch, or a logical counter

  int appends() const { return appends_; }
  const std::string& text() const { return text_; }
  const std::string& path() const { return options_.path; }

  struct Replay {
    std::vector<json> entries;
    bool torn_tail = false;
  };
  // Torn final line: truncated with a warning flag. Corruption on an earlier
  // line is a hard error that names the line number.
  static Replay replay_text(const std::string& text);
  static Replay replay_file(const std::string& path);

 private:
  Options options_;
  std::ofstream file_;
  std::string text_;
  int appends_ = 0;
  std::int64_t logical_clock_ = 0;
};

}  // namespace smnas
