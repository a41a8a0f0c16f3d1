// Runs the eight acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "minisched/annotate.h"
#include "minisched/checker.h"
#include "minisched/emit.h"
#include "minisched/encoder.h"
#include "minisched/expr.h"
#include "minisched/lower.h"
#include "minisched/parser.h"
#include "mutations.h"
#include "test_util.h"

using namespace minisched;

namespace {

const char* const algorithms[] = {"blur", "count", "matmul", "conv1d", "chain"};

std::string golden(const std::string& name) { return read_file(std::string(MINISCHED_GOLDEN) + "/" + name); }

pipeline load(const std::string& alg, int64_t extent = 0) {
  return mutants::load_pipeline(corpus(alg + ".hal"), alg + ".hal", extent);
}

std::vector<std::string> schedules_of(const std::string& alg) {
  std::vector<std::string> out;
  for (int v = 0; v <= 4; ++v) {
    std::string name = alg + "_v" + std::to_string(v) + ".sched";
    if (v == 0 || !corpus(name).empty()) out.push_back(name);
  }
  if (alg == "blur") out.push_back("listing5.sched");
  return out;
}

lowered_program annotated(const pipeline& p, const std::string& sched_text) {
  lowered_program prog = lower(apply_directives(p, parse_schedule(sched_text, p)));
  annotate(prog);
  return prog;
}

std::string squash(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

size_t occurrences(const std::string& s, const std::string& what) {
  size_t n = 0;
  for (size_t at = s.find(what); at != std::string::npos; at = s.find(what, at + 1)) ++n;
  return n;
}

std::string between(const std::string& s, const std::string& from, const std::string& to) {
  size_t a = s.find(from);
  if (a == std::string::npos) return "";
  size_t b = s.find(to, a);
  return s.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

// Collects the reasons a criterion fails; empty means it passed.
struct verdict {
  std::vector<std::string> problems;
  std::string note;

  void require(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

verdict golden_frontend() {
  verdict v;
  auto t0 = clock_type::now();
  std::string got = print_pvl(encode(load("count")));
  double secs = since(t0);
  v.require(got == golden("count.pvl"), "encode(count) differs from tests/golden/count.pvl");
  for (const char* piece : {"pure int count1r(int x, int r) = r == 0 ? count0(x)", " requires 0<=r && r<=10;",
                            " ensures (0<=\\result && \\result<=r);", " decreases r;",
                            "pure int count(int x) = count1r(x, 10);"}) {
    v.require(got.find(piece) != std::string::npos, std::string("missing: ") + piece);
  }
  v.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  v.note = std::to_string(secs) + " s";
  return v;
}

verdict golden_backend() {
  verdict v;
  auto t0 = clock_type::now();
  std::string c = emit_c(annotated(load("blur"), corpus("listing5.sched"))).source;
  double secs = since(t0);
  v.require(squash(c) == squash(golden("blur_listing5.c")), "emit differs from tests/golden/blur_listing5.c");
  v.require(c.find("#pragma omp parallel for\n  for (int yo = 0; yo < 0 + 128; yo++)") != std::string::npos,
            "no parallel yo loop over [0, 128)");
  v.require(c.find("malloc(sizeof(int32_t) * 10240)") != std::string::npos, "no allocation of 10240");
  std::string consume = between(c, "// consume blur_x", "} // for xo");
  v.require(occurrences(consume, "_blur_y[_t") == 2, "not two unrolled stores per xo iteration");
  v.require(consume.find("loop_invariant 0<=xo && xo<=512;") != std::string::npos, "no bounds invariant");
  v.require(consume.find("yo*8<=y && y<yo*8 + 10; Perm(&_blur_x[(y - yo*8)*1024 + x], 1\\2)") != std::string::npos,
            "no blur_x read permission over 10 rows");
  v.require(consume.find("Perm(&_blur_y[(yo*8 + yi)*1024 + (xof*2 + xif)], 1\\1)") != std::string::npos,
            "no blur_y write permission");
  v.require(consume.find("0<=xof && xof<xo && 0<=xif && xif<2; _blur_y[") != std::string::npos,
            "no partial ensures over xof < xo");
  v.require(secs < 2.0, "took " + std::to_string(secs) + " s");
  v.note = std::to_string(secs) + " s";
  return v;
}

// Sizes cycle with the seed so that split factors sometimes divide the
// extent and sometimes do not.
const int64_t oracle_sizes[] = {13, 16, 24, 32};

verdict oracle_equivalence() {
  verdict v;
  auto t0 = clock_type::now();
  std::set<std::string> directives;
  int runs = 0;
  for (const char* alg : algorithms) {
    std::vector<std::string> scheds = schedules_of(alg);
    v.require(scheds.size() >= 4, std::string(alg) + " has fewer than 4 schedules");
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      pipeline p = load(alg, oracle_sizes[(seed - 1) % 4]);
      valuation val = random_valuation(p, seed);
      array_value want = eval_reference(p, val).at(p.output);
      for (const std::string& s : scheds) {
        std::vector<directive> ds = parse_schedule(corpus(s), p);
        for (const directive& d : ds) directives.insert(directive_name(d.kind));
        lowered_program prog = lower(apply_directives(p, ds));
        annotate(prog);
        backend_run run = run_lowered(prog, val);
        std::string where = std::string(alg) + " " + s + " seed " + std::to_string(seed);
        v.require(run.report.pass() && run.output.data == want.data, where + ": run_lowered differs from reference");
        check_report r = check_annotations(prog, val);
        v.require(r.pass(), where + ": " + r.summary());
        ++runs;
      }
    }
  }
  for (const char* d : {"split", "fuse", "reorder", "parallel", "unroll", "compute_at", "store_at"}) {
    v.require(directives.count(d) > 0, std::string("no schedule uses ") + d);
  }
  double secs = since(t0);
  v.require(secs < 120.0, "took " + std::to_string(secs) + " s");
  v.note = std::to_string(runs) + " runs, " + std::to_string(secs) + " s";
  return v;
}

verdict stripped_annotations() {
  verdict v;
  int pairs = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> corpus_pairs;
  for (const char* alg : algorithms) corpus_pairs.push_back({alg, schedules_of(alg)});
  corpus_pairs.push_back({"race", {"race_ok.sched", ""}});
  for (const auto& [alg, scheds] : corpus_pairs) {
    for (int64_t n : {13, 16}) {
      pipeline p = strip_annotations(load(alg, n));
      v.require(p.user_annotation_count() == 0, alg + " still has user annotations");
      for (const std::string& s : scheds) {
        lowered_program prog = annotated(p, s.empty() ? "" : corpus(s));
        for (uint64_t seed = 1; seed <= 2; ++seed) {
          check_report r = check_annotations(prog, random_valuation(p, seed));
          v.require(r.findings.empty(), alg + " " + s + " n=" + std::to_string(n) + ": " + r.summary());
        }
        ++pairs;
      }
    }
  }
  v.note = std::to_string(pairs) + " programs";
  return v;
}

verdict mutation_suite() {
  verdict v;
  int killed = 0, total = 0;
  for (const mutants::mutation& m : mutants::catalogue()) {
    ++total;
    mutants::outcome o = mutants::run(m, [](const std::string& f) { return corpus(f); });
    v.require(o.base.pass(), m.name + ": unmutated program fails: " + o.base.summary());
    v.require(o.applied, m.name + ": nothing to mutate");
    if (o.killed) {
      ++killed;
    } else {
      v.require(false, m.name + " survived: " + (o.mutant.pass() ? "pass" : o.mutant.summary()));
    }
  }
  v.require(killed >= 10, "fewer than 10 mutations killed");
  v.note = std::to_string(killed) + "/" + std::to_string(total) + " killed";
  return v;
}

verdict hdiv_algebra() {
  verdict v;
  auto t0 = clock_type::now();
  int64_t bad = 0;
  for (int64_t x = -1000; x <= 1000; ++x) {
    for (int64_t y = -1000; y <= 1000; ++y) {
      int64_t q = hdiv(x, y), r = hmod(x, y);
      bool ok = y == 0 ? (q == 0 && r == 0) : (x == y * q + r && 0 <= r && r < std::abs(y));
      if (!ok && bad++ == 0) v.require(false, "fails at x=" + std::to_string(x) + " y=" + std::to_string(y));
    }
  }
  double secs = since(t0);
  v.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  v.note = std::to_string(secs) + " s";
  return v;
}

verdict annotation_growth() {
  verdict v;
  pipeline p = load("blur");
  metrics_row m = annotation_metrics(emit_c(annotated(p, corpus("listing5.sched"))), p.user_annotation_lines());
  v.require(m.user_loa > 0, "blur has no user annotation lines");
  v.require(m.ann_incr >= 5.0, "LoA/userLoA = " + std::to_string(m.ann_incr));
  pipeline bare = strip_annotations(p);
  metrics_row z = annotation_metrics(emit_c(annotated(bare, corpus("listing5.sched"))), bare.user_annotation_lines());
  v.require(z.loa > 0, "no generated annotations without user annotations");
  std::ostringstream os;
  os << "LoA " << m.loa << " / user LoA " << m.user_loa << " = " << m.ann_incr << ", stripped LoA " << z.loa;
  v.note = os.str();
  return v;
}

verdict frontend_fidelity() {
  verdict v;
  auto t0 = clock_type::now();
  for (const char* alg : algorithms) {
    pipeline full = load(alg);
    std::vector<std::pair<std::string, int64_t>> e;
    for (const dim& d : full.output_func().dims) e.push_back({d.name, std::min<int64_t>(16, d.range.extent)});
    pipeline p = rescale(full, e);
    encoded_program prog = encode(p);
    std::vector<std::string> bad = check_decreases(prog);
    v.require(bad.empty(), std::string(alg) + ": decreases check fails");
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      check_report r = check_frontend(prog, p, random_valuation(p, seed));
      v.require(r.pass(), std::string(alg) + " seed " + std::to_string(seed) + ": " + r.summary());
    }
  }
  double secs = since(t0);
  v.require(secs < 10.0, "took " + std::to_string(secs) + " s");
  v.note = std::to_string(secs) + " s";
  return v;
}

}  // namespace

int main() {
  struct criterion {
    const char* title;
    std::function<verdict()> run;
  };
  std::vector<criterion> all = {
      {"golden front-end (count)", golden_frontend},
      {"golden back-end (blur, listing5.sched)", golden_backend},
      {"oracle equivalence over the corpus", oracle_equivalence},
      {"memory safety without user annotations", stripped_annotations},
      {"mutation suite", mutation_suite},
      {"hdiv/hmod algebra on [-1000, 1000]^2", hdiv_algebra},
      {"annotation growth", annotation_growth},
      {"front-end fidelity", frontend_fidelity},
  };
  int failed = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    verdict v;
    try {
      v = all[i].run();
    } catch (const std::exception& e) {
      v.problems.push_back(std::string("exception: ") + e.what());
    }
    bool ok = v.problems.empty();
    failed += ok ? 0 : 1;
    std::printf("criterion %zu: %s  %s (%s)\n", i + 1, ok ? "PASS" : "FAIL", all[i].title, v.note.c_str());
    size_t shown = 0;
    for (const std::string& p : v.problems) {
      if (shown++ == 5) {
        std::printf("    ... %zu more\n", v.problems.size() - 5);
        break;
      }
      std::printf("    %s\n", p.c_str());
    }
    std::fflush(stdout);
  }
  return failed;
}
