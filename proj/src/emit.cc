#include "minisched/emit.h"

#include <algorithm>
#include <sstream>

namespace minisched {

namespace {

const char* const preamble = R"(#include <stdint.h>
#include <stdlib.h>

//@ pure int hdiv(int x, int y) = y == 0 ? 0 : \euclidean_div(x, y);
//@ pure int hmod(int x, int y) = y == 0 ? 0 : \euclidean_mod(x, y);
/*@
  ensures \result == hdiv(x, y);
@*/
static inline int div_eucl(int x, int y)
{
  if (y == 0) return 0;
  int q = x / y;
  int r = x % y;
  return r < 0 ? q + (y > 0 ? -1 : 1) : q;
}
/*@
  ensures \result == hmod(x, y);
@*/
static inline int mod_eucl(int x, int y)
{
  if (y == 0) return 0;
  int r = x % y;
  return r < 0 ? r + (y > 0 ? y : -y) : r;
}
)";

const char* const tdiv_helper = R"(//@ pure int tdiv(int x, int y) = y == 0 ? 0 : x / y;
static inline int tdiv(int x, int y) { return y == 0 ? 0 : x / y; }
)";

bool uses_call(const lnode& root, const std::string& name) {
  bool found = false;
  walk(root, [&](const lnode& n) {
    if (n.kind == node_kind::store) {
      found = found || mentions_call(n.stmt.flat_value, name) ||
              (n.stmt.flat_cond.defined() && mentions_call(n.stmt.flat_cond, name));
    }
  });
  return found;
}

class emitter {
public:
  explicit emitter(const lowered_program& prog) : prog_(prog) {}

  emitted_unit run() {
    const pipeline& p = prog_.sp.p;
    os_ << preamble;
    if (uses_call(prog_.root, "tdiv")) os_ << tdiv_helper;
    os_ << "\n";
    os_ << "struct halide_dimension_t {int32_t min, max;};\n";
    os_ << "struct buffer {int32_t dimensions;struct halide_dimension_t *dim;int32_t *host;};\n";
    for (const std::string& f : prog_.abstract_inputs) os_ << "//@ pure int " << f << "(int x);\n";
    os_ << "\n";

    contract();
    os_ << "int " << p.name << "(";
    for (const alloc_info& a : prog_.inputs) os_ << "struct buffer *" << a.func << "b, ";
    os_ << "struct buffer *" << prog_.output.func << "b) {\n";
    line(1, "int32_t* _" + prog_.output.func + " = " + prog_.output.func + "b->host;");
    for (const alloc_info& a : prog_.inputs) line(1, "int32_t* _" + a.func + " = " + a.func + "b->host;");
    for (const lnode& n : prog_.root.body) node(n, 1);
    line(1, "return 0;");
    os_ << "}\n";

    emitted_unit u;
    u.source = os_.str();
    u.loops = loops_;
    u.parallel_loops = parallel_;
    count_lines(u);
    return u;
  }

private:
  const lowered_program& prog_;
  std::ostringstream os_;
  std::map<std::string, expr> env_;  // unrolled loop vars -> their value
  int temps_ = 0;
  int loops_ = 0;
  int parallel_ = 0;

  void line(int depth, const std::string& s) { os_ << std::string(static_cast<size_t>(depth) * 2, ' ') << s << "\n"; }

  expr bind(const expr& e) const { return env_.empty() ? e : simplify(substitute(e, env_)); }

  // Pipeline-level names: buffers through their struct.
  std::string outer(const expr& e) const {
    print_options o;
    o.d = dialect::c_ann;
    o.load_name = [](const std::string& n) { return n + "b->host"; };
    o.bound_name = [this](const std::string& ent, const std::string& d, bool is_max) { return bound(ent, d, is_max); };
    return print(e, o);
  }

  std::string inner(const expr& e, dialect d) const {
    print_options o;
    o.d = d;
    o.load_name = [](const std::string& n) { return "_" + n; };
    o.bound_name = [this](const std::string& ent, const std::string& dm, bool is_max) { return bound(ent, dm, is_max); };
    return print(bind(e), o);
  }

  std::string bound(const std::string& ent, const std::string& d, bool is_max) const {
    const pipeline& p = prog_.sp.p;
    auto field = [&](const std::string& base, const std::vector<std::string>& dims) -> std::string {
      for (size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] == d) return base + "b->dim[" + std::to_string(i) + "]." + (is_max ? "max" : "min");
      }
      return "";
    };
    if (const buffer* b = p.find_buffer(ent)) {
      std::string s = field(ent, b->dim_names());
      if (!s.empty()) return s;
    }
    if (ent == p.output) {
      std::string s = field(ent, p.output_func().dim_names());
      if (!s.empty()) return s;
    }
    auto v = p.bound_value(ent, d, is_max);
    return v ? std::to_string(*v) : ent + "_" + d + (is_max ? "_max" : "_min");
  }

  void buffer_block(const alloc_info& a) {
    std::string b = a.func + "b";
    size_t n = a.extent.size();
    line(1, "context " + b + " != NULL ** Perm(" + b + ", 1\\2);");
    line(1, "context Perm(" + b + "->dim, 1\\2) ** " + b + "->dim != NULL;");
    line(1, "context \\pointer_length(" + b + "->dim) == " + std::to_string(n) + ";");
    line(1, "context Perm(" + b + "->host, 1\\2) ** " + b + "->host != NULL;");
    for (size_t i = 0; i < n; ++i) {
      std::string d = b + "->dim[" + std::to_string(i) + "]";
      line(1, "context Perm(&" + d + ", 1\\2);");
      line(1, "context Perm(" + d + ".min, 1\\2) ** Perm(" + d + ".max, 1\\2);");
    }
    std::string len;
    for (size_t i = 0; i < n; ++i) len += (i ? "*" : "") + std::to_string(a.extent[i]);
    line(1, "context \\pointer_length(" + b + "->host) == " + (len.empty() ? "1" : len) + ";");
  }

  void contract() {
    os_ << "/*@\n";
    line(1, "// Buffer annotations");
    for (const alloc_info& a : prog_.inputs) buffer_block(a);
    buffer_block(prog_.output);
    for (const alloc_info& a : prog_.inputs) {
      line(1, "context " + prog_.output.func + "b->host != " + a.func + "b->host;");
    }
    auto dims_of = [&](const alloc_info& a) {
      for (size_t i = 0; i < a.extent.size(); ++i) {
        int64_t lo = 0;
        is_const(a.base[i], &lo);
        std::string d = a.func + "b->dim[" + std::to_string(i) + "]";
        line(1, "context " + d + ".min == " + std::to_string(lo) + " && " + d + ".max == " +
                    std::to_string(lo + a.extent[i]) + ";");
      }
    };
    for (const alloc_info& a : prog_.inputs) dims_of(a);
    dims_of(prog_.output);
    for (const expr& e : prog_.contract.context) line(1, "context " + outer(e) + ";");
    if (!prog_.contract.requires_.empty()) line(1, "// Pipeline preconditions");
    for (const expr& e : prog_.contract.requires_) line(1, "requires " + outer(e) + ";");
    if (!prog_.contract.ensures.empty()) line(1, "// Pipeline postconditions");
    for (const expr& e : prog_.contract.ensures) line(1, "ensures " + outer(e) + ";");
    os_ << "@*/\n";
  }

  void ann_block(int depth, const std::vector<std::pair<const char*, const std::vector<expr>*>>& parts) {
    bool any = false;
    for (const auto& [kw, list] : parts) any = any || !list->empty();
    if (!any) return;
    line(depth, "/*@");
    for (const auto& [kw, list] : parts) {
      for (const expr& e : *list) line(depth + 1, std::string(kw) + " " + inner(e, dialect::c_ann) + ";");
    }
    line(depth, "@*/");
  }

  void node(const lnode& n, int depth) {
    switch (n.kind) {
    case node_kind::block:
      for (const lnode& c : n.body) node(c, depth);
      return;
    case node_kind::produce:
    case node_kind::consume:
      line(depth, std::string("// ") + (n.kind == node_kind::produce ? "produce " : "consume ") + n.func);
      for (const lnode& c : n.body) node(c, depth);
      return;
    case node_kind::allocate: {
      std::string name = "_" + n.func;
      line(depth, "{");
      line(depth + 1, "int32_t *" + name + " = (int32_t *)malloc(sizeof(int32_t) * " + std::to_string(n.alloc.size) + ");");
      for (const lnode& c : n.body) node(c, depth + 1);
      line(depth + 1, "free(" + name + ");");
      line(depth, "} // alloc " + name);
      return;
    }
    case node_kind::store: store(n, depth); return;
    case node_kind::loop: loop(n, depth); return;
    }
  }

  void store(const lnode& n, int depth) {
    const store_stmt& s = n.stmt;
    int d = depth;
    if (s.flat_cond.defined()) {
      expr c = bind(s.flat_cond);
      int64_t v = 0;
      if (is_const(c, &v) && v == 0) return;
      if (!is_const(c, &v)) {
        line(depth, "if (" + inner(c, dialect::c_code) + ") {");
        d = depth + 1;
      }
    }
    std::string t = "_t" + std::to_string(temps_++);
    line(d, "int32_t " + t + " = " + inner(s.index, dialect::c_code) + ";");
    line(d, "_" + s.func + "[" + t + "] = " + inner(s.flat_value, dialect::c_code) + ";");
    if (d != depth) line(depth, "}");
  }

  void loop(const lnode& n, int depth) {
    expr lo = bind(n.min);
    if (n.lkind == loop_kind::unrolled) {
      for (int64_t i = 0; i < n.extent; ++i) {
        env_[n.var] = simplify(lo + make_const(i));
        for (const lnode& c : n.body) node(c, depth);
      }
      env_.erase(n.var);
      return;
    }
    std::string l = inner(lo, dialect::c_code);
    std::string hi = l + " + " + std::to_string(n.extent);
    ++loops_;
    if (n.lkind == loop_kind::parallel) {
      ++parallel_;
      line(depth, "#pragma omp parallel for");
      line(depth, "for (int " + n.var + " = " + l + "; " + n.var + " < " + hi + "; " + n.var + "++)");
      ann_block(depth, {{"context", &n.anns.context}, {"requires", &n.anns.requires_}, {"ensures", &n.anns.ensures}});
    } else {
      ann_block(depth, {{"loop_invariant", &n.anns.context}, {"loop_invariant", &n.anns.invariants}});
      line(depth, "for (int " + n.var + " = " + l + "; " + n.var + " < " + hi + "; " + n.var + "++)");
    }
    line(depth, "{");
    for (const lnode& c : n.body) node(c, depth + 1);
    line(depth, "} // for " + n.var);
  }
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

void count_lines(emitted_unit& u) {
  u.code_lines = 0;
  u.annotation_lines = 0;
  std::istringstream in(u.source);
  std::string raw;
  bool in_ann = false;
  while (std::getline(in, raw)) {
    std::string s = trim(raw);
    if (in_ann) {
      size_t end = s.find("@*/");
      std::string body = trim(end == std::string::npos ? s : s.substr(0, end));
      if (!body.empty() && body.rfind("//", 0) != 0) ++u.annotation_lines;
      if (end != std::string::npos) in_ann = false;
      continue;
    }
    if (s.rfind("/*@", 0) == 0) {
      std::string body = trim(s.substr(3));
      size_t end = body.find("@*/");
      if (end != std::string::npos) {
        body = trim(body.substr(0, end));
      } else {
        in_ann = true;
      }
      if (!body.empty()) ++u.annotation_lines;
      continue;
    }
    if (s.rfind("//@", 0) == 0) {
      ++u.annotation_lines;
      continue;
    }
    if (s.empty() || s.rfind("//", 0) == 0) continue;
    ++u.code_lines;
  }
}

emitted_unit emit_c(const lowered_program& prog) { return emitter(prog).run(); }

metrics_row annotation_metrics(const emitted_unit& u, int user_loa) {
  metrics_row r;
  r.loc = u.code_lines;
  r.loa = u.annotation_lines;
  r.loops = u.loops;
  r.user_loa = user_loa;
  r.ann_incr = static_cast<double>(r.loa) / std::max(user_loa, 1);
  return r;
}

}  // namespace minisched
