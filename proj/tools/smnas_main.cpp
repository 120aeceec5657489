// smnas command-line front end. Machine-readable results go to stdout,
// diagnostics to stderr. Exit codes: 0 success, 2 invalid input or config,
// 3 I/O failure, 4 evaluator/runtime failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "smnas.h"

namespace {

struct CtxDeleter {
  void operator()(smnas_ctx* c) const { smnas_ctx_free(c); }
};
using Ctx = std::unique_ptr<smnas_ctx, CtxDeleter>;

struct OutString {
  char* s = nullptr;
  ~OutString() { smnas_string_free(s); }
};

int report(const Ctx& ctx, smnas_status status) {
  if (status != SMNAS_OK) std::cerr << "error: " << smnas_last_error(ctx.get()) << "\n";
  return static_cast<int>(status);
}

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content;
  return bool(out);
}

// "WxH" -> {"width": W, "height": H}
bool parse_resolution(const std::string& text, int& w, int& h) {
  const auto x = text.find('x');
  if (x == std::string::npos) return false;
  try {
    w = std::stoi(text.substr(0, x));
    h = std::stoi(text.substr(x + 1));
  } catch (...) {
    return false;
  }
  return w > 0 && h > 0;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smnas: two-stage multi-objective detection architecture search"};
  app.require_subcommand(1);
  Ctx ctx(smnas_ctx_new());

  // --- validate -------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "validate an encoding or structural config");
  std::string v_encoding, v_config_path, v_space_path;
  validate->add_option("--encoding", v_encoding, "backbone encoding string");
  validate->add_option("--config", v_config_path, "structural config JSON file");
  validate->add_option("--space", v_space_path, "space definition JSON file");
  validate->callback([&]() {
    if (v_encoding.empty() == v_config_path.empty())
      throw CLI::ValidationError("validate", "pass exactly one of --encoding / --config");
    if (!v_encoding.empty()) {
      OutString out;
      const auto rc = smnas_encoding_normalize(ctx.get(), v_encoding.c_str(), &out.s);
      if (rc == SMNAS_OK) std::cout << out.s << "\n";
      std::exit(report(ctx, rc));
    }
    std::string config_text, space_text;
    if (!read_file(v_config_path, config_text)) {
      std::cerr << "error: cannot read " << v_config_path << "\n";
      std::exit(SMNAS_ERR_IO);
    }
    if (!v_space_path.empty() && !read_file(v_space_path, space_text)) {
      std::cerr << "error: cannot read " << v_space_path << "\n";
      std::exit(SMNAS_ERR_IO);
    }
    OutString out;
    const auto rc = smnas_config_validate(ctx.get(), config_text.c_str(),
                                          space_text.empty() ? nullptr : space_text.c_str(),
                                          &out.s);
    if (rc != SMNAS_OK) std::exit(report(ctx, rc));
    std::cout << out.s << "\n";
    const bool valid = std::string(out.s).find("\"valid\":true") != std::string::npos;
    std::exit(valid ? SMNAS_OK : SMNAS_ERR_INVALID);
  });

  // --- cost ------------------------------------------------------------------
  auto* cost = app.add_subcommand("cost", "analytical cost of a backbone, encoding or config");
  std::string c_backbone, c_encoding, c_config_path, c_resolution = "224x224";
  bool c_trunk_only = false;
  cost->add_option("--backbone", c_backbone, "named backbone (resnet18, ...)");
  cost->add_option("--encoding", c_encoding, "backbone encoding string");
  cost->add_option("--config", c_config_path, "structural config JSON file");
  cost->add_option("--resolution", c_resolution, "input resolution WxH (default 224x224)");
  cost->add_flag("--trunk-only", c_trunk_only, "exclude the classifier head");
  cost->callback([&]() {
    const int given = int(!c_backbone.empty()) + int(!c_encoding.empty()) +
                      int(!c_config_path.empty());
    if (given != 1)
      throw CLI::ValidationError("cost", "pass exactly one of --backbone/--encoding/--config");
    std::string query;
    if (!c_config_path.empty()) {
      std::string config_text;
      if (!read_file(c_config_path, config_text)) {
        std::cerr << "error: cannot read " << c_config_path << "\n";
        std::exit(SMNAS_ERR_IO);
      }
      query = std::string("{\"config\":") + config_text + "}";
    } else {
      int w = 0, h = 0;
      if (!parse_resolution(c_resolution, w, h)) {
        std::cerr << "error: bad --resolution, expected WxH\n";
        std::exit(SMNAS_ERR_INVALID);
      }
      const std::string backbone =
          !c_backbone.empty() ? "\"" + json_escape(c_backbone) + "\""
                              : "{\"encoding\":\"" + json_escape(c_encoding) + "\"}";
      query = "{\"backbone\":" + backbone + ",\"resolution\":{\"width\":" + std::to_string(w) +
              ",\"height\":" + std::to_string(h) + "}" +
              (c_trunk_only ? ",\"trunk_only\":true" : "") + "}";
    }
    OutString out;
    const auto rc = smnas_cost(ctx.get(), query.c_str(), &out.s);
    if (rc == SMNAS_OK) std::cout << out.s << "\n";
    std::exit(report(ctx, rc));
  });

  // --- search ------------------------------------------------------------------
  auto* search = app.add_subcommand("search", "run a stage-one or stage-two search");
  std::string s_stage, s_config_path, s_journal_dir, s_seed_path;
  bool s_resume = false, s_deterministic = false;
  long long s_rng_seed = -1;
  search->add_option("--stage", s_stage, "one | two (overrides config)");
  search->add_option("--config", s_config_path, "run config JSON file")->required();
  search->add_option("--journal-dir", s_journal_dir, "journal directory (overrides config)");
  search->add_option("--seed-file", s_seed_path, "stage-two seed config JSON file");
  search->add_option("--seed", s_rng_seed, "rng seed (overrides config)");
  search->add_flag("--resume", s_resume, "continue an interrupted journal");
  search->add_flag("--deterministic", s_deterministic, "sequential bit-reproducible mode");
  search->callback([&]() {
    std::string config_text;
    if (!read_file(s_config_path, config_text)) {
      std::cerr << "error: cannot read " << s_config_path << "\n";
      std::exit(SMNAS_ERR_IO);
    }
    // flag overrides win over config file values
    std::string overrides;
    if (!s_stage.empty()) overrides += ",\"stage\":\"" + json_escape(s_stage) + "\"";
    if (!s_journal_dir.empty())
      overrides += ",\"journal_dir\":\"" + json_escape(s_journal_dir) + "\"";
    if (s_deterministic) overrides += ",\"deterministic\":true,\"workers\":1";
    if (s_rng_seed >= 0) {
      // budget override handled engine-side via a dedicated key
      overrides += ",\"rng_seed_override\":" + std::to_string(s_rng_seed);
    }
    if (!s_seed_path.empty()) {
      std::string seed_text;
      if (!read_file(s_seed_path, seed_text)) {
        std::cerr << "error: cannot read " << s_seed_path << "\n";
        std::exit(SMNAS_ERR_IO);
      }
      overrides += ",\"seed\":" + seed_text;
    }
    if (!overrides.empty()) {
      const auto end = config_text.find_last_of('}');
      if (end == std::string::npos) {
        std::cerr << "error: run config is not a JSON object\n";
        std::exit(SMNAS_ERR_INVALID);
      }
      config_text.insert(end, overrides);
    }
    const std::string base_dir = [&] {
      const auto slash = s_config_path.find_last_of('/');
      return slash == std::string::npos ? std::string(".") : s_config_path.substr(0, slash);
    }();
    OutString out;
    const auto rc =
        smnas_search(ctx.get(), config_text.c_str(), base_dir.c_str(), s_resume ? 1 : 0, &out.s);
    if (rc == SMNAS_OK) std::cout << out.s << "\n";
    std::exit(report(ctx, rc));
  });

  // --- select / analyze / export -------------------------------------------------
  auto* select = app.add_subcommand("select", "pick k seed configs from a journal's front");
  std::string sel_journal;
  int sel_k = 6;
  select->add_option("--journal", sel_journal, "journal .jsonl path")->required();
  select->add_option("--k", sel_k, "number of configs (default 6)");
  select->callback([&]() {
    OutString out;
    const auto rc = smnas_select(ctx.get(), sel_journal.c_str(), sel_k, &out.s);
    if (rc == SMNAS_OK) std::cout << out.s << "\n";
    std::exit(report(ctx, rc));
  });

  auto* analyze = app.add_subcommand("analyze", "factor/accuracy correlation matrix from a journal");
  std::string a_journal, a_out;
  analyze->add_option("--journal", a_journal, "journal .jsonl path")->required();
  analyze->add_option("--out", a_out, "output CSV path (default stdout)");
  analyze->callback([&]() {
    OutString out;
    const auto rc = smnas_analyze(ctx.get(), a_journal.c_str(), &out.s);
    if (rc != SMNAS_OK) std::exit(report(ctx, rc));
    if (a_out.empty()) {
      std::cout << out.s;
    } else if (!write_file(a_out, out.s)) {
      std::cerr << "error: cannot write " << a_out << "\n";
      std::exit(SMNAS_ERR_IO);
    }
    std::exit(SMNAS_OK);
  });

  auto* exp = app.add_subcommand("export", "export the archive front as CSV or JSON");
  std::string e_journal, e_format = "csv", e_out;
  exp->add_option("--journal", e_journal, "journal .jsonl path")->required();
  exp->add_option("--format", e_format, "csv | json (default csv)");
  exp->add_option("--out", e_out, "output path (default stdout)");
  exp->callback([&]() {
    OutString out;
    const auto rc = smnas_export_front(ctx.get(), e_journal.c_str(), e_format.c_str(), &out.s);
    if (rc != SMNAS_OK) std::exit(report(ctx, rc));
    if (e_out.empty()) {
      std::cout << out.s;
    } else if (!write_file(e_out, out.s)) {
      std::cerr << "error: cannot write " << e_out << "\n";
      std::exit(SMNAS_ERR_IO);
    }
    std::exit(SMNAS_OK);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : SMNAS_ERR_INVALID;
  }
  return 0;
}
