#include <gtest/gtest.h>

#include "minisched/checker.h"
#include "minisched/error.h"
#include "minisched/lower.h"
#include "minisched/parser.h"
#include "test_util.h"

using namespace minisched;

namespace {

pipeline load(const std::string& name, int64_t extent = 0) {
  pipeline p = parse_pipeline(corpus(name + ".hal"), name + ".hal");
  if (extent > 0) {
    std::vector<std::pair<std::string, int64_t>> e;
    for (const dim& d : p.output_func().dims) e.push_back({d.name, extent});
    p = rescale(p, e);
  }
  return p;
}

lowered_program lower_text(const pipeline& p, const std::string& text) { return lower(apply_directives(p, parse_schedule(text, p))); }

std::vector<std::string> schedules_of(const std::string& alg) {
  std::vector<std::string> out;
  for (int v = 0; v <= 4; ++v) {
    std::string name = alg + "_v" + std::to_string(v) + ".sched";
    if (v == 0 || !corpus(name).empty()) out.push_back(name);
  }
  if (alg == "blur") out.push_back("listing5.sched");
  return out;
}

}  // namespace

// Every corpus schedule computes the same output as direct evaluation, at
// sizes that do and do not divide the split factors.
TEST(Lower, MatchesReferenceOnCorpus) {
  for (const char* alg : {"blur", "count", "matmul", "conv1d", "chain"}) {
    for (int64_t n : {2, 7, 13, 16, 33}) {
      pipeline p = load(alg, n);
      for (const std::string& s : schedules_of(alg)) {
        lowered_program prog = lower_text(p, corpus(s));
        for (uint64_t seed = 1; seed <= 3; ++seed) {
          valuation v = random_valuation(p, seed);
          backend_run r = run_lowered(prog, v);
          ASSERT_TRUE(r.report.findings.empty()) << alg << " " << s << " n=" << n << ": " << r.report.summary();
          auto ref = eval_reference(p, v);
          EXPECT_EQ(r.output.data, ref.at(p.output).data) << alg << " " << s << " n=" << n << " seed=" << seed;
        }
      }
    }
  }
}

TEST(Lower, Listing5Shape) {
  lowered_program prog = lower_text(load("blur"), corpus("listing5.sched"));
  std::string d = dump_loop_nest(prog);
  EXPECT_NE(d.find("parallel y.yo in [0, 127]:"), std::string::npos) << d;
  EXPECT_NE(d.find("store blur_x:"), std::string::npos) << d;
  EXPECT_NE(d.find("for y in [yo * 8 + yi, yo * 8 + yi + 2]:"), std::string::npos) << d;
  EXPECT_NE(d.find("unrolled x.xi in [0, 1]:"), std::string::npos) << d;
  // blur_x is stored per yo and produced per yi.
  EXPECT_LT(d.find("store blur_x:"), d.find("produce blur_x:"));
  EXPECT_LT(d.find("parallel y.yo"), d.find("store blur_x:"));
  EXPECT_LT(d.find("for y.yi"), d.find("produce blur_x:"));
}

TEST(Lower, Listing5AllocationCoversTheStrip) {
  lowered_program prog = lower_text(load("blur"), corpus("listing5.sched"));
  int64_t size = -1;
  walk(prog.root, [&](const lnode& n) {
    if (n.kind == node_kind::allocate && n.func == "blur_x") size = n.alloc.size;
  });
  // 1024 columns by 8 + 2 rows.
  EXPECT_EQ(size, 10240);
}

TEST(Lower, SplitTailIsGuarded) {
  pipeline p = load("blur", 13);
  lowered_program prog = lower_text(p, "blur_y.split(x, xo, xi, 4);");
  bool guarded = false;
  walk(prog.root, [&](const lnode& n) {
    if (n.kind == node_kind::store && n.func == "blur_y") guarded = !n.stmt.guards.empty();
  });
  EXPECT_TRUE(guarded);
  lowered_program even = lower_text(load("blur", 16), "blur_y.split(x, xo, xi, 4);");
  walk(even.root, [&](const lnode& n) {
    if (n.kind == node_kind::store && n.func == "blur_y") EXPECT_TRUE(n.stmt.guards.empty());
  });
}

TEST(Lower, LoopNamesAreValidAndUnique) {
  lowered_program prog = lower_text(load("blur"), corpus("listing5.sched"));
  walk(prog.root, [&](const lnode& n) {
    if (n.kind != node_kind::loop) return;
    EXPECT_EQ(n.var.find('.'), std::string::npos) << n.var;
    for (const lnode& c : n.body) {
      walk(c, [&](const lnode& m) {
        if (m.kind == node_kind::loop) EXPECT_NE(m.var, n.var);
      });
    }
  });
}

// b reads a, but a is computed inside a loop that b's production is outside of.
TEST(Lower, ConsumerOutsideTheComputeLoopIsRejected) {
  pipeline p = load("chain", 8);
  try {
    lower_text(p, "c.split(y, yo, yi, 2);\na.compute_at(c, x);\nb.compute_at(c, yi);\n");
    FAIL() << "expected InvalidPlacement";
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), "InvalidPlacement") << e.what();
  }
}
