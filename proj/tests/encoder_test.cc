#include <gtest/gtest.h>

#include <chrono>

#include "minisched/checker.h"
#include "minisched/encoder.h"
#include "minisched/error.h"
#include "minisched/parser.h"
#include "test_util.h"

using namespace minisched;

namespace {

pipeline load(const std::string& name) { return parse_pipeline(corpus(name + ".hal"), name + ".hal"); }

std::string golden(const std::string& name) { return read_file(std::string(MINISCHED_GOLDEN) + "/" + name); }

std::string body_of(const encoded_program& prog, const std::string& name) {
  const pvl_function* fn = prog.find(name);
  if (!fn || !fn->body.defined()) return "<none>";
  return print(fn->body, dialect::pvl);
}

std::vector<std::string> names(const std::vector<pvl_function>& fs) {
  std::vector<std::string> out;
  for (const pvl_function& f : fs) out.push_back(f.name);
  return out;
}

pipeline scaled(const std::string& name, int64_t extent) {
  pipeline p = load(name);
  std::vector<std::pair<std::string, int64_t>> ext;
  for (const dim& d : p.output_func().dims) ext.emplace_back(d.name, std::min(extent, d.range.extent));
  return rescale(p, ext);
}

}  // namespace

TEST(Encoder, CountMatchesGoldenByteForByte) {
  auto t0 = std::chrono::steady_clock::now();
  std::string got = print_pvl(encode(load("count")));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(got, golden("count.pvl"));
  EXPECT_LT(secs, 1.0);
}

TEST(Encoder, CountRecursionShape) {
  encoded_program prog = encode(load("count"));
  const pvl_function* rec = prog.find("count1r");
  ASSERT_NE(rec, nullptr);
  EXPECT_TRUE(rec->recursive);
  EXPECT_EQ(rec->params, (std::vector<std::string>{"x", "r"}));
  EXPECT_EQ(rec->decreases, (std::vector<std::string>{"r"}));
  ASSERT_EQ(rec->requires_.size(), 1u);
  EXPECT_EQ(print(rec->requires_[0].e, dialect::pvl), "0<=r && r<=10");
  EXPECT_EQ(body_of(prog, "count"), "count1r(x, 10)");
  EXPECT_EQ(body_of(prog, "count0"), "0");
}

TEST(Encoder, BlurMatchesGolden) { EXPECT_EQ(print_pvl(encode(load("blur"))), golden("blur.pvl")); }

TEST(Encoder, BufferBecomesAbstractFunctionWithBounds) {
  pipeline p = load("blur");
  auto fs = encode_buffer(p.inputs[0], 1);
  EXPECT_EQ(names(fs), (std::vector<std::string>{"inp", "inp_x_min", "inp_x_max", "inp_y_min", "inp_y_max"}));
  EXPECT_FALSE(fs[0].body.defined());

  buffer b;
  b.name = "b";
  b.dims.push_back({"x", {0, 4}, true});
  auto one = encode_buffer(b, 1);
  ASSERT_EQ(one.size(), 3u);
  EXPECT_EQ(print(one[1].body, dialect::pvl), "0");
  EXPECT_EQ(print(one[2].body, dialect::pvl), "4");
}

TEST(Encoder, BufferRequiresBecomeEnsures) {
  encoded_program prog = encode(load("matmul"));
  const pvl_function* a = prog.find("a");
  ASSERT_NE(a, nullptr);
  ASSERT_EQ(a->ensures.size(), 1u);
  EXPECT_EQ(print(a->ensures[0].e, dialect::pvl), "-100<=\\result && \\result<=100");
  EXPECT_TRUE(a->requires_.empty());
}

TEST(Encoder, UpdateOfOneRow) {
  pipeline p = parse_pipeline(
      "pipeline t(inp(x, y)) -> f(x in [0, 4), y in [0, 4))\n{\n  f(x, y) = x;\n  f(x, 0) = f(x, 0) + 1;\n}\n");
  encoded_program prog = encode(p);
  EXPECT_EQ(body_of(prog, "f0"), "x");
  EXPECT_EQ(body_of(prog, "f"), "y == 0 ? f0(x, 0) + 1 : f0(x, y)");
  check_report r = check_frontend(prog, p, random_valuation(p, 1));
  EXPECT_TRUE(r.pass()) << r.summary();
}

TEST(Encoder, UpdateOverPureVarsHasNoCondition) {
  pipeline p = parse_pipeline(
      "pipeline t(inp(x)) -> f(x in [0, 4))\n{\n  f(x) = inp(x);\n  f(x) = f(x) * 2;\n}\n");
  EXPECT_EQ(body_of(encode(p), "f"), "f0(x)*2");
}

TEST(Encoder, GuardedUpdateConditionIncludesGuard) {
  pipeline p = parse_pipeline(
      "pipeline t(inp(x)) -> f(x in [0, 4))\n{\n  f(x) = inp(x);\n  f(x) = f(x) + 1 if x > 0;\n}\n");
  encoded_program prog = encode(p);
  EXPECT_EQ(body_of(prog, "f"), "x > 0 ? f0(x) + 1 : f0(x)");
  check_report r = check_frontend(prog, p, random_valuation(p, 2));
  EXPECT_TRUE(r.pass()) << r.summary();
}

TEST(Encoder, TwoVariableReductionChain) {
  pipeline p = scaled("matmul", 4);
  encoded_program prog = encode(p);
  ASSERT_NE(prog.find("c1_rx"), nullptr);
  ASSERT_NE(prog.find("c1_ry"), nullptr);
  EXPECT_EQ(body_of(prog, "c"), "c1_ry(i, j, 4)");
  EXPECT_EQ(body_of(prog, "c1_ry"), "ry == 0 ? c0(i, j) : c1_rx(i, j, 4, ry-1)");
  EXPECT_EQ(prog.find("c1_rx")->decreases, (std::vector<std::string>{"ry", "rx"}));
  for (uint64_t seed = 0; seed < 5; ++seed) {
    check_report r = check_frontend(prog, p, random_valuation(p, seed));
    EXPECT_TRUE(r.pass()) << r.summary();
  }
}

TEST(Encoder, EmptyReductionReturnsPreviousStage) {
  pipeline p = parse_pipeline(
      "pipeline t(inp(x)) -> f(x in [0, 4))\n{\n  RDom r(0, 0);\n  f(x) = inp(x);\n"
      "  f(x) = f(x) + inp(r);\n  f.invariant(r, f(x) == inp(x));\n}\n");
  encoded_program prog = encode(p);
  EXPECT_EQ(body_of(prog, "f"), "f1r(x, 0)");
  valuation v = random_valuation(p, 3);
  check_report r = check_frontend(prog, p, v);
  EXPECT_TRUE(r.pass()) << r.summary();
  auto ref = eval_reference(p, v);
  for (int64_t x = 0; x < 4; ++x) EXPECT_EQ(ref.at("f").at({x}), v.buffers.at("inp").at({x}));
}

TEST(Encoder, MissingReductionInvariantIsAnError) {
  pipeline p = parse_pipeline(
      "pipeline t(inp(x)) -> f(x in [0, 4))\n{\n  RDom r(0, 3);\n  f(x) = 0;\n  f(x) = f(x) + inp(r);\n}\n");
  try {
    encode(p);
    FAIL() << "expected MissingReductionInvariant";
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), "MissingReductionInvariant");
  }
}

TEST(Encoder, AutogenPostcondition) {
  pipeline p = load("count");
  annotation a = autogen_pipeline_postcondition(p);
  EXPECT_EQ(print(a.body, dialect::pvl), "(\\forall int x; 0<=x && x<32; 0<=count(x) && count(x)<=10)");

  pipeline two = parse_pipeline(
      "pipeline t(inp(x)) -> f(x in [0, 4))\n{\n  f(x) = 1;\n  f.ensures(f(x) > 0);\n  f.ensures(f(x) < 2);\n}\n");
  EXPECT_EQ(print(autogen_pipeline_postcondition(two).body, dialect::pvl),
            "(\\forall int x; 0<=x && x<4; f(x) > 0 && f(x)<2)");

  pipeline none = parse_pipeline("pipeline t(inp(x)) -> f(x in [0, 4))\n{\n  f(x) = inp(x);\n}\n");
  try {
    autogen_pipeline_postcondition(none);
    FAIL() << "expected NoIntermediateAnnotation";
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), "NoIntermediateAnnotation");
  }
  pvl_lemma l = encode_pipeline_lemma(none);
  EXPECT_TRUE(l.requires_.empty());
  EXPECT_TRUE(l.ensures.empty());
}

TEST(Encoder, Deterministic) {
  for (const char* n : {"blur", "count", "matmul", "conv1d", "chain", "race"}) {
    EXPECT_EQ(print_pvl(encode(load(n))), print_pvl(encode(load(n)))) << n;
  }
}

TEST(Encoder, StaticDecreasesHoldsOnCorpus) {
  for (const char* n : {"blur", "count", "matmul", "conv1d", "chain", "race"}) {
    EXPECT_TRUE(check_decreases(encode(load(n))).empty()) << n;
  }
}

TEST(Encoder, StaticDecreasesFlagsNonDecreasingCall) {
  encoded_program prog = encode(load("count"));
  for (pvl_function& fn : prog.decls) {
    if (fn.name != "count1r") continue;
    // r instead of r-1 in the recursive call.
    fn.body = make_select(eq(make_var("r"), make_const(0)), func_call("count0", {make_var("x")}),
                          make_call("count1r", {make_var("x"), make_var("r")}));
  }
  EXPECT_EQ(check_decreases(prog), (std::vector<std::string>{"count1r"}));
}

TEST(Encoder, SemanticFidelityOnCorpus) {
  for (const char* n : {"blur", "count", "matmul", "conv1d", "chain"}) {
    pipeline p = scaled(n, 16);
    encoded_program prog = encode(p);
    for (uint64_t seed = 0; seed < 4; ++seed) {
      check_report r = check_frontend(prog, p, random_valuation(p, seed));
      EXPECT_TRUE(r.pass()) << n << "\n" << r.summary();
      EXPECT_GT(r.stats.points, 0);
    }
  }
}

TEST(Encoder, FrontendCheckRejectsWrongInvariant) {
  std::string text = corpus("count.hal");
  auto pos = text.find("0 <= count(x) <= r)");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 19, "0 <= count(x) <= r - 1)");
  pipeline p = parse_pipeline(text);
  bool caught = false;
  for (uint64_t seed = 0; seed < 4 && !caught; ++seed) {
    check_report r = check_frontend(encode(p), p, random_valuation(p, seed));
    caught = r.has("invariantViolation");
  }
  EXPECT_TRUE(caught);
}

TEST(Encoder, FrontendCheckRejectsWrongBody) {
  pipeline p = load("count");
  encoded_program prog = encode(p);
  for (pvl_function& fn : prog.decls) {
    if (fn.name == "count0") fn.body = make_const(1);
  }
  check_report r = check_frontend(prog, p, random_valuation(p, 0));
  EXPECT_TRUE(r.has("mismatch"));
  EXPECT_TRUE(r.has("invariantViolation"));
}
