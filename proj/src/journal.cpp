#include "smnas/journal.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace smnas {

Journal::Journal(Options options) : options_(std::move(options)) {
  if (!options_.path.empty()) {
    const auto dir = std::filesystem::path(options_.path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    // resume appends to the existing file; replay happens before construction
    if (std::filesystem::exists(options_.path)) {
      std::ifstream in(options_.path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      text_ = ss.str();
    }
    file_.open(options_.path, std::ios::app | std::ios::binary);
    if (!file_) throw std::runtime_error("cannot open journal file " + options_.path);
  }
}

void Journal::append(const json& entry) {
  if (options_.fail_after_appends >= 0 && appends_ >= options_.fail_after_appends)
    throw Failpoint{};
  const std::string line = entry.dump() + "\n";
  if (file_.is_open()) {
    file_ << line;
    file_.flush();
  }
  text_ += line;
  ++appends_;
}

std::int64_t Journal::now() {
  if (options_.deterministic_clock) return logical_clock_++;
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

Journal::Replay Journal::replay_text(const std::string& text) {
  Replay out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = text.substr(pos, terminated ? nl - pos : std::string::npos);
    pos = terminated ? nl + 1 : text.size();
    ++line_no;
    if (line.empty()) continue;
    json entry;
    bool bad = false;
    try {
      entry = json::parse(line);
      if (!entry.is_object() || !entry.contains("entry_type")) bad = true;
    } catch (const json::exception&) {
      bad = true;
    }
    if (bad) {
      const bool is_last = pos >= text.size();
      if (is_last && !terminated) {
        out.torn_tail = true;  // crash-truncated tail, drop it
        break;
      }
      throw std::runtime_error("journal corrupted at line " + std::to_string(line_no));
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

Journal::Replay Journal::replay_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read journal file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return replay_text(ss.str());
}

}  // namespace smnas
