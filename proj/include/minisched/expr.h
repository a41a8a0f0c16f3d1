#ifndef MINISCHED_EXPR_H
#define MINISCHED_EXPR_H

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace minisched {

// Euclidean division with x/0 == 0. The remainder is always in [0, |y|).
int64_t hdiv(int64_t x, int64_t y);
int64_t hmod(int64_t x, int64_t y);

struct rational {
  int64_t num = 0;
  int64_t den = 1;

  rational() = default;
  rational(int64_t n, int64_t d = 1);

  rational operator+(const rational& o) const;
  rational operator-(const rational& o) const;
  rational operator/(int64_t d) const;
  rational operator*(int64_t k) const;
  bool operator==(const rational& o) const { return num == o.num && den == o.den; }
  bool operator<(const rational& o) const;
  bool operator<=(const rational& o) const { return !(o < *this); }
  bool operator>(const rational& o) const { return o < *this; }
  std::string str() const;
};

enum class expr_kind {
  constant,
  var,
  func_call,
  buf_call,
  call,      // uninterpreted or helper function, e.g. p_i
  load,      // flattened array access: name[index]
  result,    // \result
  unary,
  binary,
  select,
  bound_ref, // entity.dim.min / entity.dim.max
  forall,
  perm,
};

enum class binop { add, sub, mul, div, mod, min, max, lt, le, gt, ge, eq, ne, and_, or_, implies };
enum class unop { neg, not_ };

const char* binop_token(binop op);
bool is_comparison(binop op);
bool is_logical(binop op);

class expr_node;

class expr {
public:
  expr() = default;
  expr(int64_t v);
  expr(int v) : expr(static_cast<int64_t>(v)) {}
  explicit expr(std::shared_ptr<const expr_node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const expr_node* get() const { return node_.get(); }
  const expr_node* operator->() const { return node_.get(); }
  const expr_node& operator*() const { return *node_; }

  bool same_as(const expr& o) const { return node_ == o.node_; }

private:
  std::shared_ptr<const expr_node> node_;
};

struct quant_var {
  std::string name;
  expr lo;  // inclusive
  expr hi;  // exclusive
};

class expr_node {
public:
  expr_kind kind = expr_kind::constant;
  int64_t value = 0;      // constant; perm numerator
  std::string name;       // var, call target, load target, bound_ref entity
  std::string dim;        // bound_ref dimension
  bool is_max = false;    // bound_ref
  binop bop = binop::add;
  unop uop = unop::neg;
  std::vector<expr> args; // operands, call args, load index, select parts, forall body, perm location
  std::vector<quant_var> qvars;
  bool star = false;      // \forall* (separating quantifier)
  std::vector<int64_t> dens; // perm denominator factors, printed as 1\(2*128)
};

// Builders.
expr make_const(int64_t v);
expr make_var(const std::string& name);
expr func_call(const std::string& name, std::vector<expr> args);
expr buf_call(const std::string& name, std::vector<expr> args);
expr make_call(const std::string& name, std::vector<expr> args);
expr make_load(const std::string& name, expr index);
expr make_result();
expr make_unary(unop op, expr a);
expr make_binary(binop op, expr a, expr b);
expr make_select(expr c, expr t, expr f);
expr bound_ref(const std::string& entity, const std::string& dim, bool is_max);
expr make_forall(std::vector<quant_var> vars, expr body, bool star = false);
expr make_perm(expr location, int64_t num, std::vector<int64_t> dens);

expr operator+(expr a, expr b);
expr operator-(expr a, expr b);
expr operator*(expr a, expr b);
expr operator<(expr a, expr b);
expr operator<=(expr a, expr b);
expr operator>(expr a, expr b);
expr operator>=(expr a, expr b);
expr operator&&(expr a, expr b);
expr operator||(expr a, expr b);
expr operator!(expr a);
expr eq(expr a, expr b);
expr ne(expr a, expr b);
expr implies(expr a, expr b);
expr ediv(expr a, expr b);
expr emod(expr a, expr b);
expr emin(expr a, expr b);
expr emax(expr a, expr b);

rational perm_fraction(const expr& perm);

bool equal(const expr& a, const expr& b);
inline bool operator==(const expr& a, const expr& b) { return equal(a, b); }

bool is_const(const expr& e, int64_t* v = nullptr);
std::optional<int64_t> as_const(const expr& e);
bool is_var(const expr& e, const std::string& name);

// Conjunction of a list; true when empty.
expr conjunction(const std::vector<expr>& terms);
// Splits nested && into terms.
std::vector<expr> conjuncts(const expr& e);

// Generic bottom-up rebuild. The callback may return an undefined expr to keep
// the default (children-rebuilt) node.
expr mutate(const expr& e, const std::function<expr(const expr&)>& pre);

void visit(const expr& e, const std::function<bool(const expr&)>& f);

expr substitute(const expr& e, const std::string& var, const expr& replacement);
expr substitute(const expr& e, const std::map<std::string, expr>& replacements);

std::vector<std::string> free_vars(const expr& e);
bool mentions_var(const expr& e, const std::string& var);
bool mentions_call(const expr& e, const std::string& name);

// Light local simplification: constant folding and identities. It keeps the
// shape of the input otherwise.
expr simplify(const expr& e);

// Affine view of an expression over variables.
struct affine {
  std::map<std::string, int64_t> coeffs;
  int64_t constant = 0;

  bool is_constant() const { return coeffs.empty(); }
  affine operator+(const affine& o) const;
  affine operator-(const affine& o) const;
  affine scaled(int64_t k) const;
  bool operator==(const affine& o) const { return coeffs == o.coeffs && constant == o.constant; }
};

std::optional<affine> to_affine(const expr& e);
expr from_affine(const affine& a);

enum class dialect { dsl, pvl, c_ann, c_code };

struct print_options {
  dialect d = dialect::dsl;
  // Rewrites a load target to its printed prefix (e.g. "inp" -> "inpb->host").
  std::function<std::string(const std::string&)> load_name;
  // Prints a bound reference; defaults to the dialect's own form.
  std::function<std::string(const std::string&, const std::string&, bool)> bound_name;
};

std::string print(const expr& e, const print_options& opts = {});
std::string print(const expr& e, dialect d);

}  // namespace minisched

#endif
