// mini_sched: command-line driver for the toolchain.
//
//   mini_sched encode         ALG.hal
//   mini_sched lower          ALG.hal [SCHED]
//   mini_sched emit           ALG.hal [SCHED]
//   mini_sched check-frontend ALG.hal
//   mini_sched check-backend  ALG.hal [SCHED...]
//   mini_sched report         ALG.hal [SCHED...]
//
// Exit status: 0 when every check passes, 1 on findings, 2 on usage, parse
// or scheduling errors.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "minisched/annotate.h"
#include "minisched/checker.h"
#include "minisched/emit.h"
#include "minisched/encoder.h"
#include "minisched/error.h"
#include "minisched/lower.h"
#include "minisched/parser.h"

using namespace minisched;
namespace fs = std::filesystem;

namespace {

struct options {
  std::string mode;
  std::string algorithm;
  std::vector<std::string> schedules;
  std::string scale;
  int seeds = 1;
  std::string out;
  bool json = false;
  bool dump = false;
  bool strip = false;
  bool annotations = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("UsageError", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

// "x=64,y=64" -> {{x, 64}, {y, 64}}
std::vector<std::pair<std::string, int64_t>> parse_scale(const std::string& s) {
  std::vector<std::pair<std::string, int64_t>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw error("UsageError", "bad --scale entry '" + item + "'");
    try {
      out.push_back({item.substr(0, eq), std::stoll(item.substr(eq + 1))});
    } catch (const std::exception&) {
      throw error("UsageError", "bad --scale entry '" + item + "'");
    }
  }
  return out;
}

class driver {
public:
  explicit driver(options o) : o_(std::move(o)) {}

  int run() {
    p_ = parse_pipeline(read_text(o_.algorithm), o_.algorithm);
    if (!o_.scale.empty()) p_ = rescale(p_, parse_scale(o_.scale));
    if (o_.strip) p_ = strip_annotations(p_);
    if (o_.mode == "encode") return encode_cmd();
    if (o_.mode == "check-frontend") return check_frontend_cmd();
    if (o_.schedules.empty()) o_.schedules.push_back("");
    if (o_.mode == "lower") return lower_cmd();
    if (o_.mode == "emit") return emit_cmd();
    if (o_.mode == "check-backend") return check_backend_cmd();
    return report_cmd();
  }

private:
  options o_;
  pipeline p_;

  std::string sched_name(const std::string& path) const { return path.empty() ? "default" : stem(path); }

  lowered_program build(const std::string& sched_path, bool annotate_it) const {
    std::string text = sched_path.empty() ? "" : read_text(sched_path);
    lowered_program prog = lower(apply_directives(p_, parse_schedule(text, p_, sched_path)));
    if (annotate_it) annotate(prog);
    if (o_.dump) std::cerr << dump_loop_nest(prog, annotate_it);
    return prog;
  }

  // Writes to --out/<name> or stdout.
  void output(const std::string& name, const std::string& text) const {
    if (o_.out.empty()) {
      std::cout << text;
      return;
    }
    fs::create_directories(o_.out);
    std::ofstream f(fs::path(o_.out) / name, std::ios::binary);
    if (!f) throw error("UsageError", "cannot write to '" + o_.out + "'");
    f << text;
  }

  int encode_cmd() {
    output(p_.name + ".pvl", print_pvl(encode(p_)));
    return 0;
  }

  int lower_cmd() {
    for (const std::string& s : o_.schedules) {
      output(p_.name + "_" + sched_name(s) + ".txt", dump_loop_nest(build(s, o_.annotations), o_.annotations));
    }
    return 0;
  }

  int emit_cmd() {
    for (const std::string& s : o_.schedules) {
      output(p_.name + "_" + sched_name(s) + ".c", emit_c(build(s, true)).source);
    }
    return 0;
  }

  static int threads() {
    const char* env = std::getenv("MINI_SCHED_THREADS");
    int n = env ? std::atoi(env) : 1;
    return std::max(n, 1);
  }

  // Runs fn(i) for i in [0, n) on MINI_SCHED_THREADS workers.
  static void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    size_t workers = std::min<size_t>(static_cast<size_t>(threads()), n);
    if (workers <= 1) {
      for (size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) fn(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  int print_reports(const std::vector<check_report>& reports, const std::string& file) const {
    bool all = true;
    std::ostringstream os;
    if (o_.json) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const check_report& r : reports) arr.push_back(nlohmann::ordered_json::parse(r.to_json()));
      os << arr.dump(2) << "\n";
    }
    for (const check_report& r : reports) {
      all = all && r.pass();
      if (!o_.json) {
        os << r.pipeline << " " << r.schedule << " seed " << r.seed << ": " << r.verdict() << " ("
           << r.stats.millis << " ms)\n";
        for (const finding& f : r.findings) os << "  " << f.kind << ": " << f.message << "\n";
      }
    }
    output(file, os.str());
    return all ? 0 : 1;
  }

  std::vector<check_report> run_frontend() const {
    encoded_program prog = encode(p_);
    std::vector<check_report> reports(static_cast<size_t>(o_.seeds));
    parallel_for(reports.size(), [&](size_t i) {
      uint64_t seed = i + 1;
      check_report r = check_frontend(prog, p_, random_valuation(p_, seed));
      r.schedule = "front-end";
      r.seed = seed;
      reports[i] = std::move(r);
    });
    std::vector<std::string> bad = check_decreases(prog);
    if (!bad.empty() && !reports.empty()) {
      for (const std::string& f : bad) {
        finding x;
        x.kind = "error";
        x.message = "'" + f + "' does not decrease its measure";
        reports[0].findings.push_back(x);
      }
    }
    return reports;
  }

  int check_frontend_cmd() { return print_reports(run_frontend(), p_.name + "_frontend.json"); }

  std::vector<check_report> run_backend(const std::vector<lowered_program>& progs) const {
    size_t seeds = static_cast<size_t>(o_.seeds);
    std::vector<check_report> reports(progs.size() * seeds);
    parallel_for(reports.size(), [&](size_t i) {
      uint64_t seed = i % seeds + 1;
      check_report r = check_annotations(progs[i / seeds], random_valuation(p_, seed));
      r.schedule = sched_name(o_.schedules[i / seeds]);
      r.seed = seed;
      reports[i] = std::move(r);
    });
    return reports;
  }

  int check_backend_cmd() {
    std::vector<lowered_program> progs;
    for (const std::string& s : o_.schedules) progs.push_back(build(s, true));
    return print_reports(run_backend(progs), p_.name + "_backend.json");
  }

  int report_cmd() {
    std::vector<lowered_program> progs;
    for (const std::string& s : o_.schedules) progs.push_back(build(s, true));
    std::vector<check_report> reports = run_backend(progs);
    size_t seeds = static_cast<size_t>(o_.seeds);
    int user = p_.user_annotation_lines();

    struct row {
      std::string name;
      metrics_row m;
      double seconds = 0;
      std::string verdict = "pass";
    };
    std::vector<row> rows;
    row total;
    total.name = "total";
    total.m.user_loa = user;
    for (size_t k = 0; k < progs.size(); ++k) {
      row r;
      r.name = sched_name(o_.schedules[k]);
      r.m = annotation_metrics(emit_c(progs[k]), user);
      for (size_t s = 0; s < seeds; ++s) {
        const check_report& c = reports[k * seeds + s];
        r.seconds += c.stats.millis / 1000.0;
        if (!c.pass() && r.verdict == "pass") r.verdict = c.verdict();
      }
      total.m.loc += r.m.loc;
      total.m.loa += r.m.loa;
      total.m.loops += r.m.loops;
      total.seconds += r.seconds;
      if (r.verdict != "pass") total.verdict = "fail";
      rows.push_back(r);
    }
    total.m.ann_incr = static_cast<double>(total.m.loa) / std::max(user, 1);

    std::ostringstream os;
    if (o_.json) {
      nlohmann::ordered_json j;
      j["pipeline"] = p_.name;
      j["seeds"] = o_.seeds;
      auto to_json = [](const row& r) {
        nlohmann::ordered_json x;
        x["schedule"] = r.name;
        x["loc"] = r.m.loc;
        x["loa"] = r.m.loa;
        x["loops"] = r.m.loops;
        x["userLoa"] = r.m.user_loa;
        x["annIncr"] = r.m.ann_incr;
        x["checkerSeconds"] = r.seconds;
        x["verdict"] = r.verdict;
        return x;
      };
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const row& r : rows) arr.push_back(to_json(r));
      j["rows"] = arr;
      j["total"] = to_json(total);
      os << j.dump(2) << "\n";
    } else {
      os << "| " << p_.name << " | LoC | LoA | Loops | user LoA | ann. incr. | checker T.(s) | verdict |\n";
      os << "|---|---:|---:|---:|---:|---:|---:|---|\n";
      auto line = [&](const row& r) {
        char incr[32], secs[32];
        std::snprintf(incr, sizeof incr, "%.1f", r.m.ann_incr);
        std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
        os << "| " << r.name << " | " << r.m.loc << " | " << r.m.loa << " | " << r.m.loops << " | " << r.m.user_loa
           << " | " << incr << " | " << secs << " | " << r.verdict << " |\n";
      };
      for (const row& r : rows) line(r);
      line(total);
      os << "\nChecker time is the dynamic checker's wall clock over " << o_.seeds
         << " seed(s), not a verifier's time.\n";
    }
    output(p_.name + "_report." + (o_.json ? "json" : "md"), os.str());
    return total.verdict == "pass" ? 0 : 1;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scheduling-language toolchain: encode, lower, emit and check pipelines."};
  app.require_subcommand(1);
  options o;

  auto add_common = [&](CLI::App* sub, bool schedules) {
    sub->add_option("algorithm", o.algorithm, "Algorithm file (.hal)")->required();
    if (schedules) sub->add_option("schedules", o.schedules, "Schedule files (.sched)");
    sub->add_option("--scale", o.scale, "Output extents, e.g. x=64,y=64");
    sub->add_option("--seeds", o.seeds, "Number of random inputs (seeds 1..N)")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Write results into this directory");
    sub->add_flag("--json", o.json, "JSON output");
    sub->add_flag("--dump-loopnest", o.dump, "Print the loop nest to stderr");
    sub->add_flag("--strip", o.strip, "Drop every user annotation first");
  };
  add_common(app.add_subcommand("encode", "Front-end encoding (.pvl)"), false);
  CLI::App* lower_sub = app.add_subcommand("lower", "Loop nest dump");
  add_common(lower_sub, true);
  lower_sub->add_flag("--annotations", o.annotations, "Include the generated annotations");
  add_common(app.add_subcommand("emit", "Annotated C (.c)"), true);
  add_common(app.add_subcommand("check-frontend", "Check the front-end encoding on random inputs"), false);
  add_common(app.add_subcommand("check-backend", "Check the annotated loop nests on random inputs"), true);
  add_common(app.add_subcommand("report", "LoC/LoA/Loops/time table"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  o.mode = app.get_subcommands().front()->get_name();
  try {
    return driver(o).run();
  } catch (const error& e) {
    std::cerr << e.describe() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
