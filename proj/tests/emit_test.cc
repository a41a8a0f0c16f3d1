#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "minisched/annotate.h"
#include "minisched/checker.h"
#include "minisched/emit.h"
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

lowered_program annotated(const pipeline& p, const std::string& text) {
  lowered_program prog = lower(apply_directives(p, parse_schedule(text, p)));
  annotate(prog);
  return prog;
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

std::filesystem::path scratch_dir() {
  auto d = std::filesystem::temp_directory_path() / ("minisched_emit_" + std::to_string(::getpid()));
  std::filesystem::create_directories(d);
  return d;
}

int run(const std::string& cmd, std::string* out = nullptr) {
  FILE* f = popen(cmd.c_str(), "r");
  if (!f) return -1;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) {
    if (out) out->append(buf, n);
  }
  return pclose(f);
}

const char* const strict = " -std=c11 -pedantic-errors -Wall -Wextra -Werror -Wno-unknown-pragmas";

// A main() that fills the inputs from `v`, runs the pipeline and prints the
// output one value per line.
std::string harness(const lowered_program& prog, const valuation& v) {
  std::ostringstream os;
  os << "#include <stdio.h>\n";
  os << "int main(void) {\n";
  auto buffer = [&](const alloc_info& a, const std::vector<int64_t>* data) {
    os << "  static int32_t " << a.func << "_data[" << a.size << "]";
    if (data) {
      os << " = {";
      for (size_t i = 0; i < data->size(); ++i) os << (i ? "," : "") << (*data)[i];
      os << "}";
    }
    os << ";\n";
    os << "  struct halide_dimension_t " << a.func << "_dim[" << std::max<size_t>(a.extent.size(), 1) << "] = {";
    for (size_t i = 0; i < a.extent.size(); ++i) {
      os << (i ? ", " : "") << "{" << a.base[i]->value << ", " << a.base[i]->value + a.extent[i] << "}";
    }
    if (a.extent.empty()) os << "{0, 1}";
    os << "};\n";
    os << "  struct buffer " << a.func << "b = {" << a.extent.size() << ", " << a.func << "_dim, " << a.func
       << "_data};\n";
  };
  for (const alloc_info& a : prog.inputs) buffer(a, &v.buffers.at(a.func).data);
  buffer(prog.output, nullptr);
  os << "  " << prog.sp.p.name << "(";
  for (const alloc_info& a : prog.inputs) os << "&" << a.func << "b, ";
  os << "&" << prog.output.func << "b);\n";
  os << "  for (int i = 0; i < " << prog.output.size << "; i++) printf(\"%d\\n\", (int)" << prog.output.func
     << "_data[i]);\n";
  os << "  return 0;\n}\n";
  return os.str();
}

}  // namespace

TEST(Emit, Listing5MatchesGolden) {
  lowered_program prog = annotated(load("blur"), corpus("listing5.sched"));
  emitted_unit u = emit_c(prog);
  EXPECT_EQ(squash(u.source), squash(read_file(std::string(MINISCHED_GOLDEN) + "/blur_listing5.c")));
}

TEST(Emit, Listing5Structure) {
  lowered_program prog = annotated(load("blur"), corpus("listing5.sched"));
  std::string c = emit_c(prog).source;
  EXPECT_NE(c.find("#pragma omp parallel for\n  for (int yo = 0; yo < 0 + 128; yo++)"), std::string::npos);
  EXPECT_EQ(occurrences(c, "#pragma omp parallel for"), 1u);
  EXPECT_NE(c.find("malloc(sizeof(int32_t) * 10240)"), std::string::npos);
  EXPECT_EQ(occurrences(c, "malloc("), occurrences(c, "free("));

  std::string consume = between(c, "// consume blur_x", "} // for xo");
  ASSERT_FALSE(consume.empty());
  EXPECT_EQ(occurrences(consume, "_blur_y[_t"), 2u) << consume;
  EXPECT_EQ(occurrences(consume, "for (int xo = 0; xo < 0 + 512; xo++)"), 1u);
  EXPECT_NE(consume.find("loop_invariant 0<=xo && xo<=512;"), std::string::npos) << consume;
  EXPECT_NE(consume.find("yo*8<=y && y<yo*8 + 10; Perm(&_blur_x[(y - yo*8)*1024 + x], 1\\2)"), std::string::npos)
      << consume;
  EXPECT_NE(consume.find("Perm(&_blur_y[(yo*8 + yi)*1024 + (xof*2 + xif)], 1\\1)"), std::string::npos) << consume;
  EXPECT_NE(consume.find("0<=xof && xof<xo && 0<=xif && xif<2; _blur_y[(yo*8 + yi)*1024 + (xof*2 + xif)] == hdiv("),
            std::string::npos)
      << consume;

  // The contract reads the inputs through p_i and the buffers through their struct.
  std::string contract = between(c, "/*@\n  // Buffer annotations", "@*/");
  EXPECT_NE(contract.find("inpb->host[y*1026 + x] == p_i(y*1026 + x)"), std::string::npos);
  EXPECT_NE(contract.find("requires inpb->dim[0].min == blur_yb->dim[0].min"), std::string::npos);
  EXPECT_NE(contract.find("context \\pointer_length(inpb->host) == 1026*1026;"), std::string::npos);
}

TEST(Emit, UnscheduledBlurIsOneNestWithoutAllocation) {
  lowered_program prog = annotated(load("blur"), "");
  emitted_unit u = emit_c(prog);
  EXPECT_EQ(u.source.find("malloc("), std::string::npos);
  EXPECT_EQ(u.loops, 2);
  EXPECT_EQ(u.parallel_loops, 0);
}

TEST(Emit, Deterministic) {
  lowered_program prog = annotated(load("matmul", 8), corpus("matmul_v4.sched"));
  EXPECT_EQ(emit_c(prog).source, emit_c(prog).source);
}

TEST(Emit, LineCounting) {
  emitted_unit u;
  u.source =
      "#include <stdint.h>\n"
      "\n"
      "//@ pure int p_i(int x);\n"
      "/*@\n"
      "  // comment inside\n"
      "  requires a;\n"
      "\n"
      "  ensures b; @*/\n"
      "int f(void) {\n"
      "  // plain comment\n"
      "  /*@ loop_invariant c; @*/\n"
      "  return 0;\n"
      "}\n";
  count_lines(u);
  EXPECT_EQ(u.annotation_lines, 4);
  EXPECT_EQ(u.code_lines, 4);
}

TEST(Emit, AnnotationGrowth) {
  pipeline p = load("blur");
  emitted_unit u = emit_c(annotated(p, corpus("listing5.sched")));
  metrics_row m = annotation_metrics(u, p.user_annotation_lines());
  EXPECT_GT(m.user_loa, 0);
  EXPECT_DOUBLE_EQ(m.ann_incr, static_cast<double>(m.loa) / m.user_loa);
  EXPECT_GE(m.ann_incr, 5.0) << m.loa << " / " << m.user_loa;

  pipeline bare = strip_annotations(p);
  metrics_row z = annotation_metrics(emit_c(annotated(bare, corpus("listing5.sched"))), bare.user_annotation_lines());
  EXPECT_EQ(z.user_loa, 0);
  EXPECT_GT(z.loa, 0);
  EXPECT_DOUBLE_EQ(z.ann_incr, z.loa);
  EXPECT_LT(z.loa, m.loa);
}

// The emitted C compiles under a strict C11 compiler for every corpus schedule.
TEST(Emit, CompilesAsC11) {
  auto dir = scratch_dir();
  for (const char* alg : {"blur", "count", "matmul", "conv1d", "chain", "race"}) {
    std::vector<std::string> scheds = std::string(alg) == "race" ? std::vector<std::string>{"race_ok.sched", "bad.sched"}
                                                                 : schedules_of(alg);
    for (const std::string& s : scheds) {
      emitted_unit u = emit_c(annotated(load(alg, 16), corpus(s)));
      auto file = dir / (std::string(alg) + "_" + s + ".c");
      std::ofstream(file) << u.source;
      std::string out;
      int rc = run(std::string(MINISCHED_CC) + strict + " -fsyntax-only " + file.string() + " 2>&1", &out);
      EXPECT_EQ(rc, 0) << alg << " " << s << "\n" << out;
    }
  }
  std::filesystem::remove_all(dir);
}

// Compiled and run sequentially, the emitted C computes what the loop nest
// interpreter computes.
TEST(Emit, CompiledOutputMatchesInterpreter) {
  auto dir = scratch_dir();
  for (const char* alg : {"blur", "count", "matmul", "conv1d", "chain"}) {
    pipeline p = load(alg, 13);
    for (const std::string& s : schedules_of(alg)) {
      lowered_program prog = annotated(p, corpus(s));
      valuation v = random_valuation(p, 7);
      backend_run want = run_lowered(prog, v);
      ASSERT_TRUE(want.report.pass()) << want.report.summary();
      auto src = dir / "prog.c";
      auto exe = dir / "prog";
      std::ofstream(src) << emit_c(prog).source << harness(prog, v);
      std::string out;
      int rc = run(std::string(MINISCHED_CC) + strict + " -O1 -o " + exe.string() + " " + src.string() + " 2>&1", &out);
      ASSERT_EQ(rc, 0) << alg << " " << s << "\n" << out;
      std::string got;
      ASSERT_EQ(run(exe.string(), &got), 0);
      std::istringstream in(got);
      std::vector<int64_t> values;
      int64_t x;
      while (in >> x) values.push_back(x);
      EXPECT_EQ(values, want.output.data) << alg << " " << s;
    }
  }
  std::filesystem::remove_all(dir);
}
