#ifndef MINISCHED_TEST_MUTATIONS_H
#define MINISCHED_TEST_MUTATIONS_H

// Faults planted in annotated loop nests. Each one names the algorithm and
// schedule it starts from, edits the annotated program and lists the finding
// kinds that count as catching it.

#include <algorithm>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "minisched/annotate.h"
#include "minisched/checker.h"
#include "minisched/lower.h"
#include "minisched/parser.h"

namespace mutants {

using namespace minisched;

struct mutation {
  std::string name;
  std::string algorithm;  // corpus name without .hal
  std::string schedule;   // corpus file of the unmutated program
  int64_t extent = 0;     // every output dim, 0 keeps the declared size
  // Either a replacement schedule or an edit of the annotated program. The
  // edit returns false when it found nothing to change.
  std::string mutant_schedule;
  std::function<bool(lowered_program&)> apply;
  std::set<std::string> kinds;  // every finding must be one of these
  std::string must;              // and this one must be among them, if set
};

inline std::vector<lnode*> nodes(lowered_program& p, const std::function<bool(const lnode&)>& pick) {
  std::vector<lnode*> out;
  walk_mut(p.root, [&](lnode& n) {
    if (pick(n)) out.push_back(&n);
  });
  return out;
}

inline bool has_perm(const expr& e) {
  bool found = false;
  visit(e, [&](const expr& x) {
    found = found || x->kind == expr_kind::perm;
    return !found;
  });
  return found;
}

// Rebuilds the first node `pick` accepts with `edit`; the rest is kept.
inline bool rewrite_first(expr& e, const std::function<bool(const expr&)>& pick,
                          const std::function<expr(const expr&)>& edit) {
  bool done = false;
  e = mutate(e, [&](const expr& x) -> expr {
    if (done || !pick(x)) return expr();
    done = true;
    return edit(x);
  });
  return done;
}

// Truncating division in terms of the Euclidean one, for positive divisors.
inline expr tdiv(expr a, expr b) {
  return ediv(a, b) + make_select((a < make_const(0)) && ne(emod(a, b), make_const(0)), make_const(1), make_const(0));
}

inline std::vector<mutation> catalogue() {
  std::vector<mutation> m;

  m.push_back({"parallel reduction", "race", "race_ok.sched", 0, "total.update(0).parallel(r);\n", nullptr, {"race"}});

  m.push_back({"split guard removed", "blur", "listing5.sched", 13, "",
               [](lowered_program& p) {
                 bool any = false;
                 for (lnode* n : nodes(p, [](const lnode& n) { return n.kind == node_kind::store; })) {
                   if (n->stmt.cond.defined() || n->stmt.guards.empty()) continue;
                   n->stmt.flat_cond = expr();
                   any = true;
                 }
                 return any;
               },
               // Most unguarded writes land on other rows of the same allocation.
               {"outOfBounds", "missingPermission"}});

  m.push_back({"footprint shrunk", "blur", "listing5.sched", 16, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) { return n.kind == node_kind::allocate; })) {
                   alloc_info& a = n->alloc;
                   a.extent.back() -= 1;
                   a.size = a.stride.back() * a.extent.back();
                   return true;
                 }
                 return false;
               },
               {"outOfBounds", "missingPermission", "uninitializedRead"}});

  // 0 <= v && v <= hi becomes v <= hi - 1 on the first serial loop.
  m.push_back({"loop bound invariant strengthened", "matmul", "matmul_v2.sched", 8, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::serial && !n.anns.invariants.empty();
                      })) {
                   std::string v = n->var;
                   return rewrite_first(
                       n->anns.invariants.front(),
                       [&](const expr& x) {
                         return x->kind == expr_kind::binary && x->bop == binop::le && is_var(x->args[0], v);
                       },
                       [](const expr& x) { return make_binary(binop::le, x->args[0], x->args[1] - make_const(1)); });
                 }
                 return false;
               },
               {"invariantViolation"}});

  // The finished range of a value invariant grows by one iteration.
  m.push_back({"value invariant claims the current iteration", "conv1d", "conv1d_v2.sched", 12, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::serial;
                      })) {
                   std::string v = n->var;
                   for (expr& inv : n->anns.invariants) {
                     if (has_perm(inv)) continue;
                     bool done = rewrite_first(
                         inv,
                         [&](const expr& x) {
                           if (x->kind != expr_kind::forall) return false;
                           for (const quant_var& q : x->qvars) {
                             if (is_var(q.hi, v)) return true;
                           }
                           return false;
                         },
                         [&](const expr& x) {
                           std::vector<quant_var> qs = x->qvars;
                           for (quant_var& q : qs) {
                             if (is_var(q.hi, v)) q.hi = q.hi + make_const(1);
                           }
                           return make_forall(qs, x->args[0], x->star);
                         });
                     if (done) return true;
                   }
                 }
                 return false;
               },
               {"invariantViolation", "uninitializedRead"}});

  m.push_back({"hdiv replaced by truncating division", "blur", "blur_v3.sched", 10, "",
               [](lowered_program& p) {
                 bool any = false;
                 for (lnode* n : nodes(p, [](const lnode& n) { return n.kind == node_kind::store; })) {
                   any = rewrite_first(
                             n->stmt.flat_value,
                             [](const expr& x) { return x->kind == expr_kind::binary && x->bop == binop::div; },
                             [](const expr& x) { return tdiv(x->args[0], x->args[1]); }) ||
                         any;
                 }
                 return any;
               },
               {"mismatch", "invariantViolation"}});

  m.push_back({"consume before produce", "blur", "listing5.sched", 16, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode&) { return true; })) {
                   auto& b = n->body;
                   for (size_t i = 0; i + 1 < b.size(); ++i) {
                     if (b[i].kind == node_kind::produce && b[i + 1].kind == node_kind::consume &&
                         b[i].func == b[i + 1].func) {
                       std::swap(b[i], b[i + 1]);
                       return true;
                     }
                   }
                 }
                 return false;
               },
               // The consumer's value invariants fail first.
               {"uninitializedRead", "invariantViolation"}, "uninitializedRead"});

  m.push_back({"parallel loop loses its permissions", "blur", "listing5.sched", 16, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::parallel;
                      })) {
                   for (auto* l : {&n->anns.context, &n->anns.requires_}) {
                     l->erase(std::remove_if(l->begin(), l->end(), has_perm), l->end());
                   }
                   return true;
                 }
                 return false;
               },
               {"missingPermission"}});

  // Invariant weakened: a permission range in a serial loop's invariant loses
  // its last row.
  m.push_back({"invariant weakened to a smaller permission range", "blur", "blur_v3.sched", 12, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::serial;
                      })) {
                   for (expr& inv : n->anns.invariants) {
                     if (!has_perm(inv)) continue;
                     bool done = rewrite_first(
                         inv, [](const expr& x) { return x->kind == expr_kind::forall && !x->qvars.empty(); },
                         [](const expr& x) {
                           std::vector<quant_var> qs = x->qvars;
                           qs.back().hi = qs.back().hi - make_const(1);
                           return make_forall(qs, x->args[0], x->star);
                         });
                     if (done) return true;
                   }
                 }
                 return false;
               },
               {"missingPermission"}});

  // Invariant weakened: full write permission becomes half.
  m.push_back({"invariant weakened to half a write permission", "chain", "chain_v2.sched", 9, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::serial;
                      })) {
                   for (expr& inv : n->anns.invariants) {
                     bool done = rewrite_first(
                         inv, [](const expr& x) { return x->kind == expr_kind::perm && perm_fraction(x) == rational(1); },
                         [](const expr& x) { return make_perm(x->args[0], 1, {2}); });
                     if (done) return true;
                   }
                 }
                 return false;
               },
               {"missingPermission"}});

  // Each parallel iteration claims the read share meant for all of them.
  m.push_back({"parallel read share not split", "blur", "listing5.sched", 16, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::parallel;
                      })) {
                   for (expr& c : n->anns.context) {
                     bool done = rewrite_first(
                         c, [](const expr& x) { return x->kind == expr_kind::perm && x->dens.size() > 1; },
                         [](const expr& x) { return make_perm(x->args[0], x->value, {x->dens.front()}); });
                     if (done) return true;
                   }
                 }
                 return false;
               },
               {"missingPermission", "race"}});

  m.push_back({"loop runs one iteration too far", "count", "count_v0.sched", 8, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) { return n.kind == node_kind::loop; })) {
                   n->extent += 1;
                   return true;
                 }
                 return false;
               },
               {"outOfBounds", "missingPermission"}});

  m.push_back({"reduction initialisation dropped", "count", "count_v0.sched", 8, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) { return !n.body.empty(); })) {
                   auto& b = n->body;
                   for (size_t i = 0; i < b.size(); ++i) {
                     if (b[i].kind == node_kind::store && b[i].stage == 0) {
                       b.erase(b.begin() + static_cast<long>(i));
                       return true;
                     }
                     // A loop around the initialisation alone goes with it.
                     bool only_init = b[i].kind == node_kind::loop && b[i].stage == 0 && b[i].func == p.output.func;
                     bool has_update = false;
                     walk(b[i], [&](const lnode& x) { has_update = has_update || (x.kind == node_kind::store && x.stage > 0); });
                     if (only_init && !has_update) {
                       b.erase(b.begin() + static_cast<long>(i));
                       return true;
                     }
                   }
                 }
                 return false;
               },
               {"uninitializedRead", "invariantViolation"}, "uninitializedRead"});

  m.push_back({"update value off by one", "matmul", "matmul_v4.sched", 8, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) { return n.kind == node_kind::store && n.stage > 0; })) {
                   n->stmt.flat_value = n->stmt.flat_value + make_const(1);
                   return true;
                 }
                 return false;
               },
               {"mismatch", "invariantViolation"}});

  m.push_back({"postcondition negated", "chain", "chain_v3.sched", 9, "",
               [](lowered_program& p) {
                 for (expr& e : p.contract.ensures) {
                   if (rewrite_first(
                           e, [](const expr& x) { return x->kind == expr_kind::binary && x->bop == binop::eq; },
                           [](const expr& x) { return ne(x->args[0], x->args[1]); })) {
                     return true;
                   }
                 }
                 return false;
               },
               {"invariantViolation"}});

  m.push_back({"unrolled loop drops its last copy", "blur", "listing5.sched", 16, "",
               [](lowered_program& p) {
                 for (lnode* n : nodes(p, [](const lnode& n) {
                        return n.kind == node_kind::loop && n.lkind == loop_kind::unrolled && n.extent > 1;
                      })) {
                   n->extent -= 1;
                   return true;
                 }
                 return false;
               },
               {"invariantViolation", "uninitializedRead", "mismatch"}});

  return m;
}

inline pipeline load_pipeline(const std::string& text, const std::string& file, int64_t extent) {
  pipeline p = parse_pipeline(text, file);
  if (extent > 0) {
    std::vector<std::pair<std::string, int64_t>> e;
    for (const dim& d : p.output_func().dims) e.push_back({d.name, extent});
    p = rescale(p, e);
  }
  return p;
}

struct outcome {
  bool applied = false;
  check_report base;     // the unmutated program
  check_report mutant;
  bool killed = false;   // mutant has a finding and every finding is of an expected kind
};

// `read` maps a corpus file name to its contents.
inline outcome run(const mutation& m, const std::function<std::string(const std::string&)>& read, uint64_t seed = 1) {
  outcome o;
  pipeline p = load_pipeline(read(m.algorithm + ".hal"), m.algorithm + ".hal", m.extent);
  auto build = [&](const std::string& sched) {
    lowered_program prog = lower(apply_directives(p, parse_schedule(sched, p)));
    annotate(prog);
    return prog;
  };
  valuation v = random_valuation(p, seed);
  lowered_program base = build(read(m.schedule));
  o.base = check_annotations(base, v);
  lowered_program mutant = base;
  if (!m.mutant_schedule.empty()) {
    mutant = build(m.mutant_schedule);
    o.applied = true;
  } else {
    o.applied = m.apply(mutant);
  }
  if (!o.applied) return o;
  o.mutant = check_annotations(mutant, v);
  o.killed = !o.mutant.findings.empty();
  for (const finding& f : o.mutant.findings) o.killed = o.killed && m.kinds.count(f.kind) > 0;
  if (!m.must.empty()) o.killed = o.killed && o.mutant.has(m.must);
  return o;
}

}  // namespace mutants

#endif
