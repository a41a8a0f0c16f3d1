#include "minisched/parser.h"

#include <algorithm>
#include <cctype>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace minisched {

std::string error::describe() const {
  std::ostringstream os;
  if (!span_.file.empty() || span_.length > 0) os << span_.str() << ": ";
  os << kind_ << ": " << what();
  if (!expected.empty()) {
    os << " (expected";
    for (size_t i = 0; i < expected.size(); ++i) os << (i ? ", " : " ") << expected[i];
    os << ")";
  }
  for (const diagnostic& d : diagnostics) os << "\n  " << d.span.str() << ": " << d.rule << ": " << d.message;
  return os.str();
}

const char* directive_name(directive_kind k) {
  switch (k) {
  case directive_kind::split: return "split";
  case directive_kind::fuse: return "fuse";
  case directive_kind::reorder: return "reorder";
  case directive_kind::parallel: return "parallel";
  case directive_kind::unroll: return "unroll";
  case directive_kind::compute_at: return "compute_at";
  case directive_kind::store_at: return "store_at";
  }
  return "?";
}

namespace {

enum class tok { ident, number, punct, keyword, end };

struct token {
  tok kind = tok::end;
  std::string text;
  int64_t value = 0;
  source_span span;
};

class lexer {
public:
  lexer(const std::string& text, const std::string& file) : s_(text), file_(file) {}

  std::vector<token> run() {
    std::vector<token> out;
    while (true) {
      skip_space();
      token t;
      t.span = {file_, line_, col_, 0};
      if (i_ >= s_.size()) {
        t.kind = tok::end;
        out.push_back(t);
        return out;
      }
      char c = s_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t j = i_;
        while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
        t.kind = tok::ident;
        t.text = s_.substr(i_, j - i_);
        advance(j - i_);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t j = i_;
        int64_t v = 0;
        while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
          int d = s_[j] - '0';
          if (v > (std::numeric_limits<int64_t>::max() - d) / 10) fail("integer literal out of range", t.span);
          v = v * 10 + d;
          ++j;
        }
        t.kind = tok::number;
        t.value = v;
        t.text = s_.substr(i_, j - i_);
        advance(j - i_);
      } else if (c == '\\') {
        size_t j = i_ + 1;
        while (j < s_.size() && std::isalpha(static_cast<unsigned char>(s_[j]))) ++j;
        t.kind = tok::keyword;
        t.text = s_.substr(i_, j - i_);
        if (j < s_.size() && s_[j] == '*' && t.text == "\\forall") {
          ++j;
          t.text += "*";
        }
        if (t.text != "\\result" && t.text != "\\forall" && t.text != "\\forall*") {
          fail("unknown keyword '" + t.text + "'", t.span);
        }
        advance(j - i_);
      } else {
        static const char* puncts[] = {"==>", "->", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "[", "]", "{",
                                       "}",   ",",  ";",  ".",  "=",  "<",  ">",  "+",  "-",  "*", "/", "%", "!"};
        bool matched = false;
        for (const char* p : puncts) {
          size_t n = std::char_traits<char>::length(p);
          if (s_.compare(i_, n, p) == 0) {
            t.kind = tok::punct;
            t.text = p;
            advance(n);
            matched = true;
            break;
          }
        }
        if (!matched) {
          std::string shown = std::isprint(static_cast<unsigned char>(c)) ? std::string(1, c) : "\\x" + hex(c);
          fail("unexpected character '" + shown + "'", t.span);
        }
      }
      t.span.length = static_cast<int>(t.text.size());
      out.push_back(t);
    }
  }

private:
  const std::string& s_;
  std::string file_;
  size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;

  static std::string hex(char c) {
    const char* digits = "0123456789abcdef";
    unsigned char u = static_cast<unsigned char>(c);
    return std::string{digits[u >> 4], digits[u & 15]};
  }

  [[noreturn]] void fail(const std::string& msg, const source_span& span) {
    throw error("ParseError", msg, span);
  }

  void advance(size_t n) {
    for (size_t k = 0; k < n && i_ < s_.size(); ++k) {
      if (s_[i_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++i_;
    }
  }

  void skip_space() {
    while (i_ < s_.size()) {
      char c = s_[i_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance(1);
      } else if (c == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '/') {
        while (i_ < s_.size() && s_[i_] != '\n') advance(1);
      } else {
        break;
      }
    }
  }
};

class token_stream {
public:
  explicit token_stream(std::vector<token> toks) : t_(std::move(toks)) {}

  const token& peek(size_t k = 0) const { return t_[std::min(i_ + k, t_.size() - 1)]; }
  const token& next() {
    const token& t = t_[i_];
    if (i_ + 1 < t_.size()) ++i_;
    return t;
  }
  bool at_end() const { return peek().kind == tok::end; }
  bool is(const std::string& p, size_t k = 0) const {
    const token& t = peek(k);
    return (t.kind == tok::punct || t.kind == tok::ident || t.kind == tok::keyword) && t.text == p;
  }
  bool accept(const std::string& p) {
    if (is(p)) {
      next();
      return true;
    }
    return false;
  }
  const token& expect(const std::string& p) {
    if (!is(p)) fail_expected({"'" + p + "'"});
    return next();
  }
  std::string ident() {
    if (peek().kind != tok::ident) fail_expected({"identifier"});
    return next().text;
  }
  int64_t integer() {
    bool neg = accept("-");
    if (peek().kind != tok::number) fail_expected({"integer"});
    int64_t v = next().value;
    return neg ? -v : v;
  }
  [[noreturn]] void fail_expected(std::vector<std::string> expected) const {
    const token& t = peek();
    std::string found = t.kind == tok::end ? "end of input" : "'" + t.text + "'";
    error e("ParseError", "unexpected " + found, t.span);
    e.expected = std::move(expected);
    throw e;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw error("ParseError", msg, peek().span); }

  size_t pos() const { return i_; }

private:
  std::vector<token> t_;
  size_t i_ = 0;
};

const std::set<std::string> reserved = {"pipeline", "requires", "ensures", "param", "RDom", "select",
                                        "min",      "max",      "if",      "in"};

class pipeline_parser {
public:
  pipeline_parser(const std::string& text, const std::string& file) : ts_(lexer(text, file).run()), file_(file) {}

  pipeline run() {
    if (ts_.at_end()) {
      error e("ParseError", "empty input", source_span{file_, 1, 1, 0});
      e.expected = {"'pipeline'"};
      throw e;
    }
    p_.span = ts_.peek().span;
    ts_.expect("pipeline");
    p_.name = ts_.ident();
    ts_.expect("(");
    if (!ts_.is(")")) {
      do {
        parse_input();
      } while (ts_.accept(","));
    }
    ts_.expect(")");
    ts_.expect("->");
    p_.output = ts_.ident();
    ts_.expect("(");
    do {
      dim d;
      d.name = ts_.ident();
      ts_.expect("in");
      d.range = parse_range();
      d.declared = true;
      out_dims_.push_back(d);
    } while (ts_.accept(","));
    ts_.expect(")");
    while (ts_.is("requires") || ts_.is("ensures")) {
      bool req = ts_.is("requires");
      annotation a = parse_annotation_expr(req ? ann_kind::requires_ : ann_kind::ensures, [&] {
        ts_.next();
        return parse_expr();
      });
      (req ? p_.pre : p_.post).push_back(a);
    }
    ts_.expect("{");
    while (!ts_.is("}")) {
      if (ts_.at_end()) ts_.fail_expected({"'}'"});
      parse_statement();
    }
    ts_.expect("}");
    if (!ts_.at_end()) ts_.fail_expected({"end of input"});
    finish();
    return p_;
  }

private:
  token_stream ts_;
  std::string file_;
  pipeline p_;
  std::vector<dim> out_dims_;
  int depth_ = 0;

  struct depth_guard {
    pipeline_parser& p;
    explicit depth_guard(pipeline_parser& pp) : p(pp) {
      if (++p.depth_ > 200) p.ts_.fail("expression nested too deeply");
    }
    ~depth_guard() { --p.depth_; }
  };

  interval parse_range() {
    ts_.expect("[");
    int64_t lo = ts_.integer();
    ts_.expect(",");
    int64_t hi = ts_.integer();
    ts_.expect(")");
    if (hi < lo) ts_.fail("empty interval");
    return {lo, hi - lo};
  }

  void parse_input() {
    buffer b;
    b.span = ts_.peek().span;
    b.name = ts_.ident();
    ts_.expect("(");
    do {
      dim d;
      d.name = ts_.ident();
      if (ts_.accept("in")) {
        d.range = parse_range();
        d.declared = true;
      }
      b.dims.push_back(d);
    } while (ts_.accept(","));
    ts_.expect(")");
    p_.inputs.push_back(b);
  }

  template <typename F>
  annotation parse_annotation_expr(ann_kind k, F body) {
    annotation a;
    a.kind = k;
    a.span = ts_.peek().span;
    a.body = body();
    int last_line = ts_.peek().span.line;
    ts_.expect(";");
    a.lines = last_line - a.span.line + 1;
    return a;
  }

  const rdom* find_rdom(const std::string& n) const {
    for (const rdom& r : p_.rdoms) {
      if (r.name == n) return &r;
    }
    return nullptr;
  }

  void parse_statement() {
    source_span span = ts_.peek().span;
    if (ts_.accept("param")) {
      param q;
      q.name = ts_.ident();
      ts_.expect("=");
      q.value = ts_.integer();
      ts_.expect(";");
      p_.params.push_back(q);
      return;
    }
    if (ts_.accept("RDom")) {
      rdom r;
      r.span = span;
      r.name = ts_.ident();
      ts_.expect("(");
      std::vector<interval> ivs;
      do {
        int64_t lo = ts_.integer();
        ts_.expect(",");
        int64_t ext = ts_.integer();
        if (ext < 0) ts_.fail("negative reduction extent");
        ivs.push_back({lo, ext});
      } while (ts_.accept(","));
      ts_.expect(")");
      ts_.expect(";");
      static const char* comps[] = {"x", "y", "z", "w"};
      if (ivs.size() > 4) ts_.fail("reduction domains have at most four dimensions");
      for (size_t i = 0; i < ivs.size(); ++i) {
        std::string n = ivs.size() == 1 ? r.name : r.name + "." + comps[i];
        r.vars.push_back({n, ivs[i]});
      }
      if (find_rdom(r.name)) ts_.fail("reduction domain '" + r.name + "' declared twice");
      p_.rdoms.push_back(r);
      return;
    }
    std::string name = ts_.ident();
    if (reserved.count(name)) ts_.fail("'" + name + "' cannot start a statement");
    if (ts_.accept(".")) {
      std::string method = ts_.ident();
      ann_kind k;
      if (method == "ensures") k = ann_kind::ensures;
      else if (method == "requires") k = ann_kind::requires_;
      else if (method == "context") k = ann_kind::context;
      else if (method == "invariant") k = ann_kind::invariant;
      else ts_.fail_expected({"'ensures'", "'requires'", "'context'", "'invariant'"});
      annotation a;
      a.kind = k;
      a.span = span;
      ts_.expect("(");
      if (k == ann_kind::invariant) {
        a.rvar = ts_.ident();
        if (ts_.accept(".")) a.rvar += "." + ts_.ident();
        ts_.expect(",");
      }
      a.body = parse_expr();
      ts_.expect(")");
      int last_line = ts_.peek().span.line;
      ts_.expect(";");
      a.lines = last_line - span.line + 1;
      attach(name, a, span);
      return;
    }
    // Definition.
    ts_.expect("(");
    std::vector<expr> lhs;
    do {
      lhs.push_back(parse_expr());
    } while (ts_.accept(","));
    ts_.expect(")");
    ts_.expect("=");
    stage s;
    s.span = span;
    s.lhs = lhs;
    s.rhs = parse_expr();
    if (ts_.accept("if")) s.guard = parse_expr();
    ts_.expect(";");
    define(name, s, span);
  }

  void define(const std::string& name, stage s, const source_span& span) {
    func* f = p_.find_func(name);
    if (!f) {
      if (p_.find_buffer(name)) throw error("ParseError", "cannot define input '" + name + "'", span);
      func nf;
      nf.name = name;
      nf.span = span;
      std::set<std::string> seen;
      for (const expr& a : s.lhs) {
        if (a->kind != expr_kind::var) throw error("ParseError", "pure definition arguments must be variables", span);
        if (!seen.insert(a->name).second) throw error("DuplicateDim", "variable '" + a->name + "' repeated", span);
        nf.dims.push_back({a->name, {}, false});
      }
      s.kind = stage_kind::pure;
      nf.stages.push_back(s);
      p_.funcs.push_back(nf);
      return;
    }
    if (&p_.funcs.back() != f) {
      throw error("ParseError", "definitions of '" + name + "' must be consecutive", span);
    }
    // Reduction if a reduction variable appears.
    const rdom* used = nullptr;
    auto check = [&](const expr& e) {
      for (const std::string& v : free_vars(e)) {
        for (const rdom& r : p_.rdoms) {
          for (const rdom_var& rv : r.vars) {
            if (rv.name == v) {
              if (used && used != &r) throw error("ParseError", "update uses two reduction domains", span);
              used = &r;
            }
          }
        }
      }
    };
    for (const expr& a : s.lhs) check(a);
    check(s.rhs);
    if (s.guard.defined()) check(s.guard);
    if (used) {
      s.kind = stage_kind::reduction;
      s.rd = *used;
    } else {
      s.kind = stage_kind::update;
    }
    f->stages.push_back(s);
  }

  void attach(const std::string& name, const annotation& a, const source_span& span) {
    if (func* f = p_.find_func(name)) {
      f->stages.back().anns.push_back(a);
      return;
    }
    for (buffer& b : p_.inputs) {
      if (b.name == name) {
        if (a.kind != ann_kind::requires_) {
          throw error("ParseError", "inputs only accept requires annotations", span);
        }
        b.anns.push_back(a);
        return;
      }
    }
    throw error("ParseError", "annotation for '" + name + "' precedes its definition", span);
  }

  // Expressions.

  expr parse_expr() {
    depth_guard g(*this);
    expr a = parse_or();
    if (ts_.accept("==>")) return implies(a, parse_expr());
    return a;
  }

  expr parse_or() {
    expr a = parse_and();
    while (ts_.accept("||")) a = a || parse_and();
    return a;
  }

  expr parse_and() {
    expr a = parse_eq();
    while (ts_.accept("&&")) a = a && parse_eq();
    return a;
  }

  expr parse_eq() {
    expr a = parse_rel();
    while (ts_.is("==") || ts_.is("!=")) {
      bool is_eq = ts_.next().text == "==";
      expr b = parse_rel();
      a = is_eq ? eq(a, b) : ne(a, b);
    }
    return a;
  }

  static bool rel_op(const std::string& t, binop* op) {
    if (t == "<") *op = binop::lt;
    else if (t == "<=") *op = binop::le;
    else if (t == ">") *op = binop::gt;
    else if (t == ">=") *op = binop::ge;
    else return false;
    return true;
  }

  expr parse_rel() {
    expr a = parse_add();
    expr chain;
    binop op;
    while (ts_.peek().kind == tok::punct && rel_op(ts_.peek().text, &op)) {
      ts_.next();
      expr b = parse_add();
      expr term = make_binary(op, a, b);
      chain = chain.defined() ? (chain && term) : term;
      a = b;
    }
    return chain.defined() ? chain : a;
  }

  expr parse_add() {
    expr a = parse_mul();
    while (ts_.is("+") || ts_.is("-")) {
      bool plus = ts_.next().text == "+";
      expr b = parse_mul();
      a = plus ? a + b : a - b;
    }
    return a;
  }

  expr parse_mul() {
    expr a = parse_unary();
    while (ts_.is("*") || ts_.is("/") || ts_.is("%")) {
      std::string t = ts_.next().text;
      expr b = parse_unary();
      a = t == "*" ? a * b : t == "/" ? ediv(a, b) : emod(a, b);
    }
    return a;
  }

  expr parse_unary() {
    depth_guard g(*this);
    if (ts_.accept("-")) {
      if (ts_.peek().kind == tok::number) {
        int64_t v = ts_.next().value;
        return make_const(-v);
      }
      return make_unary(unop::neg, parse_unary());
    }
    if (ts_.accept("!")) return make_unary(unop::not_, parse_unary());
    return parse_primary();
  }

  std::vector<expr> parse_args() {
    ts_.expect("(");
    std::vector<expr> args;
    if (!ts_.is(")")) {
      do {
        args.push_back(parse_expr());
      } while (ts_.accept(","));
    }
    ts_.expect(")");
    return args;
  }

  expr parse_forall() {
    bool star = ts_.next().text == "\\forall*";
    std::vector<std::string> names;
    do {
      names.push_back(ts_.ident());
    } while (ts_.accept(","));
    expr cond, body;
    if (ts_.accept(";")) {
      cond = parse_expr();
      ts_.expect(";");
      body = parse_expr();
    } else {
      ts_.expect(".");
      expr e = parse_expr();
      if (e->kind != expr_kind::binary || e->bop != binop::implies) {
        ts_.fail("quantifier needs a range condition followed by '==>'");
      }
      cond = e->args[0];
      body = e->args[1];
    }
    std::map<std::string, expr> lo, hi;
    std::vector<expr> rest;
    for (const expr& c : conjuncts(cond)) {
      if (c->kind == expr_kind::binary) {
        const expr& a = c->args[0];
        const expr& b = c->args[1];
        auto bound_of = [&](const expr& v) -> std::string {
          if (v->kind != expr_kind::var) return "";
          for (const std::string& n : names) {
            if (v->name == n) return n;
          }
          return "";
        };
        std::string va = bound_of(a), vb = bound_of(b);
        bool used = false;
        switch (c->bop) {
        case binop::le:
          if (!vb.empty() && !lo.count(vb)) lo[vb] = a, used = true;
          else if (!va.empty() && !hi.count(va)) hi[va] = simplify(b + make_const(1)), used = true;
          break;
        case binop::lt:
          if (!va.empty() && !hi.count(va)) hi[va] = b, used = true;
          else if (!vb.empty() && !lo.count(vb)) lo[vb] = simplify(a + make_const(1)), used = true;
          break;
        case binop::ge:
          if (!va.empty() && !lo.count(va)) lo[va] = b, used = true;
          else if (!vb.empty() && !hi.count(vb)) hi[vb] = simplify(a + make_const(1)), used = true;
          break;
        case binop::gt:
          if (!vb.empty() && !hi.count(vb)) hi[vb] = a, used = true;
          else if (!va.empty() && !lo.count(va)) lo[va] = simplify(b + make_const(1)), used = true;
          break;
        default: break;
        }
        if (used) continue;
      }
      rest.push_back(c);
    }
    std::vector<quant_var> qv;
    for (const std::string& n : names) {
      if (!lo.count(n) || !hi.count(n)) ts_.fail("quantified variable '" + n + "' needs a lower and upper bound");
      qv.push_back({n, lo[n], hi[n]});
    }
    if (!rest.empty()) body = implies(conjunction(rest), body);
    return make_forall(qv, body, star);
  }

  expr parse_primary() {
    const token& t = ts_.peek();
    if (t.kind == tok::number) {
      ts_.next();
      return make_const(t.value);
    }
    if (t.kind == tok::keyword) {
      if (t.text == "\\result") {
        ts_.next();
        return make_result();
      }
      return parse_forall();
    }
    if (ts_.accept("(")) {
      expr e = parse_expr();
      ts_.expect(")");
      return e;
    }
    if (t.kind != tok::ident) ts_.fail_expected({"expression"});
    std::string name = ts_.next().text;
    if (name == "select") {
      auto args = parse_args();
      if (args.size() != 3) ts_.fail("select takes three arguments");
      return make_select(args[0], args[1], args[2]);
    }
    if (name == "min" || name == "max") {
      auto args = parse_args();
      if (args.size() != 2) ts_.fail(name + " takes two arguments");
      return name == "min" ? emin(args[0], args[1]) : emax(args[0], args[1]);
    }
    if (reserved.count(name)) ts_.fail("unexpected keyword '" + name + "'");
    if (ts_.is("(")) {
      auto args = parse_args();
      return func_call(name, args);
    }
    if (ts_.is(".") && ts_.peek(1).kind == tok::ident) {
      if (find_rdom(name)) {
        ts_.next();
        std::string comp = ts_.ident();
        return make_var(name + "." + comp);
      }
      ts_.next();
      std::string d = ts_.ident();
      ts_.expect(".");
      std::string which = ts_.ident();
      if (which != "min" && which != "max") ts_.fail_expected({"'min'", "'max'"});
      return bound_ref(name, d, which == "max");
    }
    return make_var(name);
  }

  void finish() {
    // Calls to inputs become buffer accesses.
    std::function<expr(const expr&)> fix_all = [&](const expr& e) -> expr {
      return mutate(e, [&](const expr& x) -> expr {
        if (x->kind == expr_kind::func_call && p_.find_buffer(x->name)) {
          std::vector<expr> args;
          for (const expr& a : x->args) args.push_back(fix_all(a));
          return buf_call(x->name, args);
        }
        return expr();
      });
    };
    for (func& f : p_.funcs) {
      for (stage& s : f.stages) {
        for (expr& a : s.lhs) a = fix_all(a);
        s.rhs = fix_all(s.rhs);
        if (s.guard.defined()) s.guard = fix_all(s.guard);
        for (annotation& a : s.anns) a.body = fix_all(a.body);
      }
    }
    for (buffer& b : p_.inputs) {
      for (annotation& a : b.anns) a.body = fix_all(a.body);
    }
    for (annotation& a : p_.pre) a.body = fix_all(a.body);
    for (annotation& a : p_.post) a.body = fix_all(a.body);

    func* out = p_.find_func(p_.output);
    if (out) {
      if (out->dims.size() != out_dims_.size()) {
        throw error("ValidationError", "output '" + p_.output + "' declares a different number of dimensions",
                    out->span);
      }
      for (size_t i = 0; i < out_dims_.size(); ++i) {
        if (out->dims[i].name != out_dims_[i].name) {
          throw error("UnknownDim", "output dimension '" + out_dims_[i].name + "' does not match definition",
                      out->span);
        }
        out->dims[i] = out_dims_[i];
      }
    }
    std::vector<diagnostic> diags = validate_pipeline(p_);
    if (diags.empty()) {
      auto more = infer_domains(p_);
      diags.insert(diags.end(), more.begin(), more.end());
    }
    if (!diags.empty()) {
      error e("ValidationError", diags.front().rule + ": " + diags.front().message, diags.front().span);
      e.diagnostics = diags;
      throw e;
    }
  }
};

}  // namespace

pipeline parse_pipeline(const std::string& text, const std::string& file) {
  pipeline_parser pp(text, file);
  return pp.run();
}

namespace {

struct stage_dims {
  std::vector<std::string> dims;  // innermost first
};

std::vector<std::string> initial_dims(const func& f, size_t si) {
  std::vector<std::string> out;
  const stage& s = f.stages[si];
  if (s.rd) {
    for (const rdom_var& r : s.rd->vars) out.push_back(r.name);
  }
  for (size_t i = 0; i < f.dims.size(); ++i) {
    if (si == 0 || is_var(s.lhs[i], f.dims[i].name)) out.push_back(f.dims[i].name);
  }
  return out;
}

}  // namespace

std::vector<directive> parse_schedule(const std::string& text, const pipeline& p, const std::string& file) {
  token_stream ts(lexer(text, file).run());
  std::vector<directive> out;
  std::map<std::pair<std::string, int>, std::vector<std::string>> dims;
  auto dims_of = [&](const func& f, int si) -> std::vector<std::string>& {
    auto key = std::make_pair(f.name, si);
    auto it = dims.find(key);
    if (it == dims.end()) it = dims.emplace(key, initial_dims(f, si)).first;
    return it->second;
  };
  struct pending {
    directive d;
  };
  std::vector<size_t> placements;

  while (!ts.at_end()) {
    if (ts.accept(";")) continue;
    source_span fspan = ts.peek().span;
    std::string fname = ts.ident();
    const func* f = p.find_func(fname);
    if (!f) throw error("UnknownFunc", "unknown function '" + fname + "'", fspan);
    int si = 0;
    if (!ts.is(".")) ts.fail_expected({"'.'"});
    while (ts.accept(".")) {
      source_span span = ts.peek().span;
      std::string name = ts.ident();
      auto need_dim = [&](const std::string& d, const source_span& sp) {
        auto& ds = dims_of(*f, si);
        if (std::find(ds.begin(), ds.end(), d) == ds.end()) {
          throw error("UnknownDim", "'" + fname + "' has no dimension '" + d + "'", sp);
        }
      };
      auto fresh_dim = [&](const std::string& d, const source_span& sp) {
        auto& ds = dims_of(*f, si);
        if (std::find(ds.begin(), ds.end(), d) != ds.end()) {
          throw error("DuplicateDim", "'" + fname + "' already has a dimension '" + d + "'", sp);
        }
      };
      auto dim_arg = [&]() {
        source_span sp = ts.peek().span;
        std::string d = ts.ident();
        if (ts.accept(".")) d += "." + ts.ident();
        return std::make_pair(d, sp);
      };
      directive d;
      d.func = fname;
      d.stage = si;
      d.span = span;
      if (name == "update") {
        ts.expect("(");
        int64_t k = ts.integer();
        ts.expect(")");
        if (k < 0 || k + 1 >= static_cast<int64_t>(f->stages.size())) {
          throw error("UnknownDim", "'" + fname + "' has no update " + std::to_string(k), span);
        }
        si = static_cast<int>(k + 1);
        continue;
      }
      ts.expect("(");
      if (name == "split") {
        d.kind = directive_kind::split;
        auto [old, so] = dim_arg();
        ts.expect(",");
        auto [outer, sout] = dim_arg();
        ts.expect(",");
        auto [inner, sin] = dim_arg();
        ts.expect(",");
        d.factor = ts.integer();
        need_dim(old, so);
        if (outer == inner) throw error("DuplicateDim", "split names must differ", sin);
        auto& ds = dims_of(*f, si);
        auto it = std::find(ds.begin(), ds.end(), old);
        size_t pos = it - ds.begin();
        ds.erase(it);
        fresh_dim(outer, sout);
        fresh_dim(inner, sin);
        ds.insert(ds.begin() + pos, outer);
        ds.insert(ds.begin() + pos, inner);
        d.names = {old, outer, inner};
      } else if (name == "fuse") {
        d.kind = directive_kind::fuse;
        auto [a, sa] = dim_arg();
        ts.expect(",");
        auto [b, sb] = dim_arg();
        ts.expect(",");
        auto [fused, sf] = dim_arg();
        need_dim(a, sa);
        need_dim(b, sb);
        if (a == b) throw error("DuplicateDim", "cannot fuse a dimension with itself", sb);
        auto& ds = dims_of(*f, si);
        ds.erase(std::find(ds.begin(), ds.end(), a));
        auto it = std::find(ds.begin(), ds.end(), b);
        size_t pos = it - ds.begin();
        ds.erase(it);
        fresh_dim(fused, sf);
        ds.insert(ds.begin() + std::min(pos, ds.size()), fused);
        d.names = {a, b, fused};
      } else if (name == "reorder") {
        d.kind = directive_kind::reorder;
        std::set<std::string> seen;
        do {
          auto [x, sx] = dim_arg();
          need_dim(x, sx);
          if (!seen.insert(x).second) throw error("DuplicateDim", "'" + x + "' listed twice", sx);
          d.names.push_back(x);
        } while (ts.accept(","));
        auto& ds = dims_of(*f, si);
        std::vector<size_t> slots;
        for (size_t i = 0; i < ds.size(); ++i) {
          if (seen.count(ds[i])) slots.push_back(i);
        }
        for (size_t i = 0; i < slots.size(); ++i) ds[slots[i]] = d.names[i];
      } else if (name == "parallel" || name == "unroll") {
        d.kind = name == "parallel" ? directive_kind::parallel : directive_kind::unroll;
        auto [x, sx] = dim_arg();
        need_dim(x, sx);
        d.names = {x};
      } else if (name == "compute_at" || name == "store_at") {
        d.kind = name == "compute_at" ? directive_kind::compute_at : directive_kind::store_at;
        source_span sg = ts.peek().span;
        std::string g = ts.ident();
        if (!p.find_func(g)) throw error("UnknownFunc", "unknown function '" + g + "'", sg);
        ts.expect(",");
        auto [x, sx] = dim_arg();
        d.names = {g, x};
        d.span = sx;
        placements.push_back(out.size());
      } else {
        error e("ParseError", "unknown directive '" + name + "'", span);
        e.expected = {"split", "fuse", "reorder", "parallel", "unroll", "compute_at", "store_at", "update"};
        throw e;
      }
      ts.expect(")");
      out.push_back(d);
    }
    if (!ts.at_end() && !ts.is(";")) ts.fail_expected({"';'", "'.'"});
  }
  // Placement dims are resolved against the consumer's final loop names.
  for (size_t i : placements) {
    const directive& d = out[i];
    const func* g = p.find_func(d.names[0]);
    bool found = false;
    for (size_t si = 0; si < g->stages.size(); ++si) {
      auto& ds = dims_of(*g, static_cast<int>(si));
      found = found || std::find(ds.begin(), ds.end(), d.names[1]) != ds.end();
    }
    if (!found) throw error("UnknownDim", "'" + g->name + "' has no dimension '" + d.names[1] + "'", d.span);
    if (g->name == d.func) throw error("PlacementCycle", "'" + d.func + "' cannot be placed inside itself", d.span);
  }
  return out;
}

namespace {

std::string print_interval(const interval& iv) {
  return "[" + std::to_string(iv.min) + ", " + std::to_string(iv.max()) + ")";
}

void print_annotation(std::ostream& os, const std::string& target, const annotation& a) {
  os << "  " << target << "." << ann_kind_name(a.kind) << "(";
  if (a.kind == ann_kind::invariant) os << a.rvar << ", ";
  os << print(a.body) << ");\n";
}

}  // namespace

std::string print_pipeline(const pipeline& p) {
  std::ostringstream os;
  os << "pipeline " << p.name << "(";
  for (size_t i = 0; i < p.inputs.size(); ++i) {
    const buffer& b = p.inputs[i];
    os << (i ? ", " : "") << b.name << "(";
    for (size_t d = 0; d < b.dims.size(); ++d) {
      os << (d ? ", " : "") << b.dims[d].name;
      if (b.dims[d].declared) os << " in " << print_interval(b.dims[d].range);
    }
    os << ")";
  }
  os << ") -> " << p.output << "(";
  if (const func* out = p.find_func(p.output)) {
    for (size_t d = 0; d < out->dims.size(); ++d) {
      os << (d ? ", " : "") << out->dims[d].name << " in " << print_interval(out->dims[d].range);
    }
  }
  os << ")\n";
  for (const annotation& a : p.pre) os << "  requires " << print(a.body) << ";\n";
  for (const annotation& a : p.post) os << "  ensures " << print(a.body) << ";\n";
  os << "{\n";
  for (const param& q : p.params) os << "  param " << q.name << " = " << q.value << ";\n";
  for (const rdom& r : p.rdoms) {
    os << "  RDom " << r.name << "(";
    for (size_t i = 0; i < r.vars.size(); ++i) {
      os << (i ? ", " : "") << r.vars[i].range.min << ", " << r.vars[i].range.extent;
    }
    os << ");\n";
  }
  for (const buffer& b : p.inputs) {
    for (const annotation& a : b.anns) print_annotation(os, b.name, a);
  }
  for (const func& f : p.funcs) {
    for (const stage& s : f.stages) {
      os << "  " << f.name << "(";
      for (size_t i = 0; i < s.lhs.size(); ++i) os << (i ? ", " : "") << print(s.lhs[i]);
      os << ") = " << print(s.rhs);
      if (s.guard.defined()) os << " if " << print(s.guard);
      os << ";\n";
      for (const annotation& a : s.anns) print_annotation(os, f.name, a);
    }
  }
  os << "}\n";
  return os.str();
}

std::string print_schedule(const std::vector<directive>& ds) {
  std::ostringstream os;
  std::string cur;
  int cur_stage = -1;
  for (size_t i = 0; i < ds.size(); ++i) {
    const directive& d = ds[i];
    if (d.func != cur || d.stage != cur_stage) {
      if (i) os << ";\n";
      os << d.func;
      if (d.stage > 0) os << ".update(" << d.stage - 1 << ")";
      cur = d.func;
      cur_stage = d.stage;
    }
    os << "." << directive_name(d.kind) << "(";
    for (size_t k = 0; k < d.names.size(); ++k) os << (k ? ", " : "") << d.names[k];
    if (d.kind == directive_kind::split) os << ", " << d.factor;
    os << ")";
  }
  if (!ds.empty()) os << ";\n";
  return os.str();
}

pipeline rescale(const pipeline& p, const std::vector<std::pair<std::string, int64_t>>& extents) {
  pipeline q = p;
  func* out = q.find_func(q.output);
  for (const auto& [name, ext] : extents) {
    bool found = false;
    for (dim& d : out->dims) {
      if (d.name == name) {
        d.range.extent = ext;
        found = true;
      }
    }
    if (!found) throw error("UnknownDim", "output '" + q.output + "' has no dimension '" + name + "'");
    if (ext <= 0) throw error("UsageError", "scale extents must be positive");
  }
  for (func& f : q.funcs) {
    if (f.name == q.output) continue;
    for (dim& d : f.dims) {
      if (!d.declared) d.range = {};
    }
  }
  for (buffer& b : q.inputs) {
    for (dim& d : b.dims) {
      if (!d.declared) d.range = {};
    }
  }
  auto diags = infer_domains(q);
  if (!diags.empty()) {
    error e("ValidationError", diags.front().rule + ": " + diags.front().message, diags.front().span);
    e.diagnostics = diags;
    throw e;
  }
  return q;
}

}  // namespace minisched
