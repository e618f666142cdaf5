#include "sdesym/expr.hpp"

#include "sdesym/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sdesym {

namespace {

std::size_t hash_combine(std::size_t seed, std::size_t v)
{
    return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

std::size_t node_hash(const Node& n)
{
    std::size_t h = static_cast<std::size_t>(n.kind) * 0x9e3779b97f4a7c15ULL + 0x1234567;
    switch (n.kind) {
    case NodeKind::Num:
        h = hash_combine(h, std::hash<std::string>{}(rat_str(n.num)));
        break;
    case NodeKind::Sym:
        h = hash_combine(h, std::hash<std::string>{}(n.sym));
        break;
    case NodeKind::Fun:
        h = hash_combine(h, static_cast<std::size_t>(n.fn));
        [[fallthrough]];
    default:
        for (const auto& k : n.kids)
            h = hash_combine(h, k->hash);
        break;
    }
    return h;
}

Expr finish(Node n)
{
    n.hash = node_hash(n);
    return std::make_shared<const Node>(std::move(n));
}

int kind_rank(NodeKind k)
{
    switch (k) {
    case NodeKind::Num: return 0;
    case NodeKind::Sym: return 1;
    case NodeKind::Fun: return 2;
    case NodeKind::Pow: return 3;
    case NodeKind::Mul: return 4;
    case NodeKind::Add: return 5;
    }
    return 6;
}

} // namespace

Expr make_num(Rat r)
{
    Node n;
    n.kind = NodeKind::Num;
    n.num = std::move(r);
    return finish(std::move(n));
}

Expr make_num(long long v) { return make_num(Rat(v)); }

Expr make_sym(std::string name)
{
    Node n;
    n.kind = NodeKind::Sym;
    n.sym = std::move(name);
    return finish(std::move(n));
}

Expr zero_expr()
{
    static const Expr z = make_num(0);
    return z;
}

Expr one_expr()
{
    static const Expr o = make_num(1);
    return o;
}

bool is_num(const Expr& e) { return e->kind == NodeKind::Num; }

bool is_num(const Expr& e, const Rat& value)
{
    return e->kind == NodeKind::Num && e->num == value;
}

const Rat* as_num(const Expr& e)
{
    return e->kind == NodeKind::Num ? &e->num : nullptr;
}

int compare(const Expr& a, const Expr& b)
{
    if (a.get() == b.get())
        return 0;
    int ra = kind_rank(a->kind), rb = kind_rank(b->kind);
    if (ra != rb)
        return ra < rb ? -1 : 1;
    switch (a->kind) {
    case NodeKind::Num:
        if (a->num == b->num)
            return 0;
        return a->num < b->num ? -1 : 1;
    case NodeKind::Sym:
        return a->sym.compare(b->sym) < 0 ? -1 : (a->sym == b->sym ? 0 : 1);
    case NodeKind::Fun:
        if (a->fn != b->fn)
            return static_cast<int>(a->fn) < static_cast<int>(b->fn) ? -1 : 1;
        return compare(a->kids[0], b->kids[0]);
    default: {
        if (a->kids.size() != b->kids.size())
            return a->kids.size() < b->kids.size() ? -1 : 1;
        for (std::size_t i = 0; i < a->kids.size(); ++i) {
            int c = compare(a->kids[i], b->kids[i]);
            if (c != 0)
                return c;
        }
        return 0;
    }
    }
}

bool struct_equal(const Expr& a, const Expr& b)
{
    if (a.get() == b.get())
        return true;
    if (a->hash != b->hash)
        return false;
    return compare(a, b) == 0;
}

Expr make_add(std::vector<Expr> terms)
{
    std::vector<Expr> flat;
    Rat constant(0);
    std::vector<Expr> stack(terms.rbegin(), terms.rend());
    while (!stack.empty()) {
        Expr t = stack.back();
        stack.pop_back();
        if (t->kind == NodeKind::Add) {
            for (auto it = t->kids.rbegin(); it != t->kids.rend(); ++it)
                stack.push_back(*it);
        } else if (t->kind == NodeKind::Num) {
            constant += t->num;
        } else {
            flat.push_back(std::move(t));
        }
    }
    if (constant != 0 || flat.empty())
        flat.push_back(make_num(constant));
    if (flat.size() == 1)
        return flat[0];
    std::sort(flat.begin(), flat.end(), [](const Expr& a, const Expr& b) {
        return compare(a, b) < 0;
    });
    Node n;
    n.kind = NodeKind::Add;
    n.kids = std::move(flat);
    return finish(std::move(n));
}

Expr make_mul(std::vector<Expr> factors)
{
    std::vector<Expr> flat;
    Rat coeff(1);
    std::vector<Expr> stack(factors.rbegin(), factors.rend());
    while (!stack.empty()) {
        Expr f = stack.back();
        stack.pop_back();
        if (f->kind == NodeKind::Mul) {
            for (auto it = f->kids.rbegin(); it != f->kids.rend(); ++it)
                stack.push_back(*it);
        } else if (f->kind == NodeKind::Num) {
            coeff *= f->num;
        } else {
            flat.push_back(std::move(f));
        }
    }
    if (coeff == 0)
        return zero_expr();
    if (coeff != 1 || flat.empty())
        flat.push_back(make_num(coeff));
    if (flat.size() == 1)
        return flat[0];
    std::sort(flat.begin(), flat.end(), [](const Expr& a, const Expr& b) {
        return compare(a, b) < 0;
    });
    Node n;
    n.kind = NodeKind::Mul;
    n.kids = std::move(flat);
    return finish(std::move(n));
}

namespace {

// Exact value of a rational power of a rational, when it exists.
bool fold_num_pow(const Rat& base, const Rat& expo, Rat& out)
{
    if (is_integer(expo)) {
        BigInt n = rat_num(expo);
        if (base == 0 && n < 0)
            return false;
        if (n > 1024 || n < -1024)
            return false;
        out = rat_pow(base, n);
        return true;
    }
    if (base < 0)
        return false;
    BigInt q = rat_den(expo);
    if (q > 16)
        return false;
    BigInt rn, rd;
    if (!exact_root(rat_num(base), static_cast<unsigned>(q.convert_to<unsigned long>()), rn))
        return false;
    if (!exact_root(rat_den(base), static_cast<unsigned>(q.convert_to<unsigned long>()), rd))
        return false;
    BigInt p = rat_num(expo);
    if (p > 1024 || p < -1024)
        return false;
    out = rat_pow(Rat(rn, rd), p);
    return true;
}

} // namespace

Expr make_pow(Expr base, Expr exponent)
{
    if (const Rat* xe = as_num(exponent)) {
        if (*xe == 0)
            return one_expr();
        if (*xe == 1)
            return base;
        if (const Rat* b = as_num(base)) {
            Rat folded;
            if (fold_num_pow(*b, *xe, folded))
                return make_num(folded);
        }
    }
    if (is_num(base, Rat(1)))
        return one_expr();
    if (is_num(base, Rat(0))) {
        if (const Rat* xe = as_num(exponent); xe && *xe > 0)
            return zero_expr();
    }
    Node n;
    n.kind = NodeKind::Pow;
    n.kids = {std::move(base), std::move(exponent)};
    return finish(std::move(n));
}

Expr make_fun(FunKind fn, Expr arg)
{
    switch (fn) {
    case FunKind::Exp:
        if (is_num(arg, Rat(0)))
            return one_expr();
        break;
    case FunKind::Log:
        if (is_num(arg, Rat(1)))
            return zero_expr();
        break;
    case FunKind::Sin:
        if (is_num(arg, Rat(0)))
            return zero_expr();
        break;
    case FunKind::Cos:
        if (is_num(arg, Rat(0)))
            return one_expr();
        break;
    }
    Node n;
    n.kind = NodeKind::Fun;
    n.fn = fn;
    n.kids = {std::move(arg)};
    return finish(std::move(n));
}

bool contains_symbol(const Expr& e, const std::string& name)
{
    switch (e->kind) {
    case NodeKind::Num:
        return false;
    case NodeKind::Sym:
        return e->sym == name;
    default:
        for (const auto& k : e->kids)
            if (contains_symbol(k, name))
                return true;
        return false;
    }
}

void collect_symbols(const Expr& e, std::set<std::string>& out)
{
    switch (e->kind) {
    case NodeKind::Num:
        return;
    case NodeKind::Sym:
        out.insert(e->sym);
        return;
    default:
        for (const auto& k : e->kids)
            collect_symbols(k, out);
    }
}

// ---- simplification ------------------------------------------------------

namespace {

Expr simp(const Expr& e);

Expr simp_fun(FunKind fn, const Expr& arg)
{
    if (fn == FunKind::Exp) {
        if (arg->kind == NodeKind::Fun && arg->fn == FunKind::Log)
            return arg->kids[0];
        // exp(c*log(u) + rest) -> u^c * exp(rest); valid on the positive
        // sampling domains the evaluator enforces for log and powers.
        std::vector<Expr> terms =
            arg->kind == NodeKind::Add ? arg->kids : std::vector<Expr>{arg};
        std::vector<Expr> powers, rest;
        for (const auto& t : terms) {
            if (t->kind == NodeKind::Fun && t->fn == FunKind::Log) {
                powers.push_back(t->kids[0]);
                continue;
            }
            if (t->kind == NodeKind::Mul) {
                std::vector<Expr> cofactor;
                Expr log_arg;
                bool single_log = true;
                for (const auto& k : t->kids) {
                    if (k->kind == NodeKind::Fun && k->fn == FunKind::Log) {
                        if (log_arg)
                            single_log = false;
                        log_arg = k->kids[0];
                    } else {
                        cofactor.push_back(k);
                    }
                }
                if (log_arg && single_log) {
                    powers.push_back(make_pow(log_arg, make_mul(std::move(cofactor))));
                    continue;
                }
            }
            rest.push_back(t);
        }
        if (!powers.empty()) {
            if (!rest.empty())
                powers.push_back(make_fun(FunKind::Exp, make_add(rest)));
            return simp(make_mul(powers));
        }
    }
    if (fn == FunKind::Log && arg->kind == NodeKind::Fun && arg->fn == FunKind::Exp)
        return arg->kids[0];
    return make_fun(fn, arg);
}

Expr simp_pow(const Expr& base, const Expr& expo)
{
    if (base->kind == NodeKind::Pow)
        return simp(make_pow(base->kids[0], simp(make_mul({base->kids[1], expo}))));
    if (base->kind == NodeKind::Fun && base->fn == FunKind::Exp)
        return simp_fun(FunKind::Exp, simp(make_mul({base->kids[0], expo})));
    if (const Rat* q = as_num(expo)) {
        if (base->kind == NodeKind::Mul) {
            std::vector<Expr> pieces;
            pieces.reserve(base->kids.size());
            for (const auto& f : base->kids)
                pieces.push_back(make_pow(f, expo));
            return simp(make_mul(std::move(pieces)));
        }
        if (base->kind == NodeKind::Add && is_integer(*q) && *q >= 2 && *q <= 4) {
            std::vector<Expr> copies(static_cast<std::size_t>(rat_num(*q).convert_to<long>()),
                                     base);
            return simp(make_mul(std::move(copies)));
        }
    }
    return make_pow(base, expo);
}

Expr simp_add(const std::vector<Expr>& raw);

Expr simp_mul(const std::vector<Expr>& raw)
{
    // Flatten first so nested products distribute correctly.
    Expr flattened = make_mul(raw);
    if (flattened->kind != NodeKind::Mul) {
        if (flattened->kind == NodeKind::Add)
            return simp_add(flattened->kids);
        return flattened;
    }
    const std::vector<Expr>& factors = flattened->kids;

    bool has_sum = std::any_of(factors.begin(), factors.end(), [](const Expr& f) {
        return f->kind == NodeKind::Add;
    });
    if (has_sum) {
        std::vector<std::vector<Expr>> monomials{{}};
        for (const auto& f : factors) {
            if (f->kind == NodeKind::Add) {
                std::vector<std::vector<Expr>> next;
                next.reserve(monomials.size() * f->kids.size());
                for (const auto& m : monomials)
                    for (const auto& term : f->kids) {
                        auto copy = m;
                        copy.push_back(term);
                        next.push_back(std::move(copy));
                    }
                monomials = std::move(next);
            } else {
                for (auto& m : monomials)
                    m.push_back(f);
            }
        }
        std::vector<Expr> terms;
        terms.reserve(monomials.size());
        for (auto& m : monomials)
            terms.push_back(simp_mul(m));
        return simp_add(terms);
    }

    Rat coeff(1);
    std::vector<Expr> exp_args;
    std::vector<std::pair<Expr, std::vector<Expr>>> bases; // base -> exponent terms

    auto add_power = [&](const Expr& b, const Expr& x) {
        for (auto& [eb, xs] : bases)
            if (struct_equal(eb, b)) {
                xs.push_back(x);
                return;
            }
        bases.emplace_back(b, std::vector<Expr>{x});
    };

    for (const auto& f : factors) {
        if (const Rat* r = as_num(f)) {
            coeff *= *r;
            if (coeff == 0)
                return zero_expr();
            continue;
        }
        if (f->kind == NodeKind::Fun && f->fn == FunKind::Exp) {
            exp_args.push_back(f->kids[0]);
            continue;
        }
        if (f->kind == NodeKind::Pow) {
            add_power(f->kids[0], f->kids[1]);
            continue;
        }
        add_power(f, one_expr());
    }

    std::vector<Expr> pieces;
    bool cascaded = false;
    for (auto& [b, xs] : bases) {
        Expr x = xs.size() == 1 ? xs[0] : simp_add(xs);
        if (is_num(x, Rat(0)))
            continue;
        Expr p = is_num(x, Rat(1)) ? b : simp_pow(b, x);
        if (p->kind == NodeKind::Num) {
            coeff *= p->num;
            if (coeff == 0)
                return zero_expr();
            continue;
        }
        if (p->kind == NodeKind::Mul || p->kind == NodeKind::Add ||
            (p->kind == NodeKind::Fun && p->fn == FunKind::Exp))
            cascaded = true;
        pieces.push_back(std::move(p));
    }
    if (!exp_args.empty()) {
        Expr merged = simp_fun(FunKind::Exp, simp_add(exp_args));
        if (merged->kind == NodeKind::Num)
            coeff *= merged->num;
        else
            pieces.push_back(std::move(merged));
    }
    pieces.push_back(make_num(coeff));
    Expr out = make_mul(std::move(pieces));
    if (cascaded)
        out = simp(out);
    return out;
}

Expr simp_add(const std::vector<Expr>& raw)
{
    Expr flattened = make_add(raw);
    if (flattened->kind != NodeKind::Add)
        return flattened;

    Rat constant(0);
    std::vector<std::pair<Expr, Rat>> groups; // canonical term -> coefficient

    auto add_term = [&](const Expr& key, const Rat& c) {
        for (auto& [k, acc] : groups)
            if (struct_equal(k, key)) {
                acc += c;
                return;
            }
        groups.emplace_back(key, c);
    };

    for (const auto& t : flattened->kids) {
        if (const Rat* r = as_num(t)) {
            constant += *r;
            continue;
        }
        if (t->kind == NodeKind::Mul) {
            Rat c(1);
            std::vector<Expr> rest;
            rest.reserve(t->kids.size());
            for (const auto& k : t->kids) {
                if (const Rat* r = as_num(k))
                    c *= *r;
                else
                    rest.push_back(k);
            }
            add_term(make_mul(std::move(rest)), c);
            continue;
        }
        add_term(t, Rat(1));
    }

    std::vector<Expr> terms;
    for (auto& [k, c] : groups) {
        if (c == 0)
            continue;
        terms.push_back(c == 1 ? k : make_mul({make_num(c), k}));
    }
    if (constant != 0)
        terms.push_back(make_num(constant));
    return make_add(std::move(terms));
}

Expr simp(const Expr& e)
{
    switch (e->kind) {
    case NodeKind::Num:
    case NodeKind::Sym:
        return e;
    case NodeKind::Fun:
        return simp_fun(e->fn, simp(e->kids[0]));
    case NodeKind::Pow:
        return simp_pow(simp(e->kids[0]), simp(e->kids[1]));
    case NodeKind::Add: {
        std::vector<Expr> kids;
        kids.reserve(e->kids.size());
        for (const auto& k : e->kids)
            kids.push_back(simp(k));
        return simp_add(kids);
    }
    case NodeKind::Mul: {
        std::vector<Expr> kids;
        kids.reserve(e->kids.size());
        for (const auto& k : e->kids)
            kids.push_back(simp(k));
        return simp_mul(kids);
    }
    }
    return e;
}

} // namespace

Expr simplify(const Expr& e)
{
    Expr cur = e;
    for (int i = 0; i < 8; ++i) {
        Expr next = simp(cur);
        if (struct_equal(next, cur))
            return next;
        cur = next;
    }
    return cur;
}

// ---- differentiation -------------------------------------------------------

namespace {

Expr diff_raw(const Expr& e, const std::string& v)
{
    switch (e->kind) {
    case NodeKind::Num:
        return zero_expr();
    case NodeKind::Sym:
        return e->sym == v ? one_expr() : zero_expr();
    case NodeKind::Add: {
        std::vector<Expr> parts;
        parts.reserve(e->kids.size());
        for (const auto& k : e->kids)
            parts.push_back(diff_raw(k, v));
        return make_add(std::move(parts));
    }
    case NodeKind::Mul: {
        std::vector<Expr> parts;
        for (std::size_t i = 0; i < e->kids.size(); ++i) {
            if (!contains_symbol(e->kids[i], v))
                continue;
            std::vector<Expr> factors;
            factors.reserve(e->kids.size());
            for (std::size_t j = 0; j < e->kids.size(); ++j)
                factors.push_back(j == i ? diff_raw(e->kids[j], v) : e->kids[j]);
            parts.push_back(make_mul(std::move(factors)));
        }
        return make_add(std::move(parts));
    }
    case NodeKind::Pow: {
        const Expr& b = e->kids[0];
        const Expr& x = e->kids[1];
        if (!contains_symbol(x, v)) {
            // x * b^(x-1) * b'
            return make_mul({x, make_pow(b, make_add({x, make_num(-1)})), diff_raw(b, v)});
        }
        // b^x * (x' log b + x b'/b)
        Expr t1 = make_mul({diff_raw(x, v), make_fun(FunKind::Log, b)});
        Expr t2 = make_mul({x, diff_raw(b, v), make_pow(b, make_num(-1))});
        return make_mul({e, make_add({t1, t2})});
    }
    case NodeKind::Fun: {
        const Expr& u = e->kids[0];
        Expr du = diff_raw(u, v);
        switch (e->fn) {
        case FunKind::Exp:
            return make_mul({e, du});
        case FunKind::Log:
            return make_mul({du, make_pow(u, make_num(-1))});
        case FunKind::Sin:
            return make_mul({make_fun(FunKind::Cos, u), du});
        case FunKind::Cos:
            return make_mul({make_num(-1), make_fun(FunKind::Sin, u), du});
        }
    }
    }
    return zero_expr();
}

} // namespace

Expr differentiate(const Expr& e, const std::string& v)
{
    if (!contains_symbol(e, v))
        return zero_expr();
    return simplify(diff_raw(e, v));
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& bindings)
{
    std::function<Expr(const Expr&)> walk = [&](const Expr& n) -> Expr {
        switch (n->kind) {
        case NodeKind::Num:
            return n;
        case NodeKind::Sym: {
            auto it = bindings.find(n->sym);
            return it == bindings.end() ? n : it->second;
        }
        case NodeKind::Add: {
            std::vector<Expr> kids;
            kids.reserve(n->kids.size());
            for (const auto& k : n->kids)
                kids.push_back(walk(k));
            return make_add(std::move(kids));
        }
        case NodeKind::Mul: {
            std::vector<Expr> kids;
            kids.reserve(n->kids.size());
            for (const auto& k : n->kids)
                kids.push_back(walk(k));
            return make_mul(std::move(kids));
        }
        case NodeKind::Pow:
            return make_pow(walk(n->kids[0]), walk(n->kids[1]));
        case NodeKind::Fun:
            return make_fun(n->fn, walk(n->kids[0]));
        }
        return n;
    };
    return simplify(walk(e));
}

// ---- rendering -------------------------------------------------------------

namespace {

const char* fun_name(FunKind f)
{
    switch (f) {
    case FunKind::Exp: return "exp";
    case FunKind::Log: return "log";
    case FunKind::Sin: return "sin";
    case FunKind::Cos: return "cos";
    }
    return "?";
}

void render_rec(const Expr& e, std::ostream& os);

// true when e renders as a single grammar factor without needing parentheses
bool atom_like(const Expr& e)
{
    if (e->kind == NodeKind::Sym || e->kind == NodeKind::Fun)
        return true;
    if (const Rat* r = as_num(e))
        return is_integer(*r) && *r >= 0;
    return false;
}

void render_in_product(const Expr& e, std::ostream& os, bool first)
{
    bool need_parens = e->kind == NodeKind::Add;
    if (const Rat* r = as_num(e)) {
        // a leading rational like 1/2 parses correctly; elsewhere it needs parens
        need_parens = !first && !is_integer(*r);
        if (first && *r < 0 && !is_integer(*r))
            need_parens = false; // handled by sign outside
    }
    if (need_parens) {
        os << '(';
        render_rec(e, os);
        os << ')';
    } else {
        render_rec(e, os);
    }
}

void render_pow(const Expr& e, std::ostream& os)
{
    const Expr& b = e->kids[0];
    const Expr& x = e->kids[1];
    if (atom_like(b)) {
        render_rec(b, os);
    } else {
        os << '(';
        render_rec(b, os);
        os << ')';
    }
    os << '^';
    bool bare = x->kind == NodeKind::Sym;
    if (const Rat* r = as_num(x))
        bare = is_integer(*r);
    if (bare) {
        render_rec(x, os);
    } else {
        os << '(';
        render_rec(x, os);
        os << ')';
    }
}

// Splits a leading minus sign off a term for pretty sum rendering.
bool term_negative(const Expr& t, Expr& positive)
{
    if (const Rat* r = as_num(t)) {
        if (*r < 0) {
            positive = make_num(-*r);
            return true;
        }
        return false;
    }
    if (t->kind == NodeKind::Mul) {
        for (const auto& k : t->kids) {
            if (const Rat* r = as_num(k); r && *r < 0) {
                std::vector<Expr> kids;
                for (const auto& kk : t->kids)
                    if (kk.get() != k.get())
                        kids.push_back(kk);
                kids.push_back(make_num(-*r));
                positive = make_mul(std::move(kids));
                return true;
            }
        }
    }
    return false;
}

void render_rec(const Expr& e, std::ostream& os)
{
    switch (e->kind) {
    case NodeKind::Num:
        if (e->num < 0) {
            os << '-' << rat_str(-e->num);
        } else {
            os << rat_str(e->num);
        }
        return;
    case NodeKind::Sym:
        os << e->sym;
        return;
    case NodeKind::Fun:
        os << fun_name(e->fn) << '(';
        render_rec(e->kids[0], os);
        os << ')';
        return;
    case NodeKind::Pow:
        render_pow(e, os);
        return;
    case NodeKind::Mul: {
        Expr positive;
        if (term_negative(e, positive)) {
            os << '-';
            render_rec(positive, os);
            return;
        }
        bool first = true;
        for (const auto& k : e->kids) {
            if (!first)
                os << '*';
            render_in_product(k, os, first);
            first = false;
        }
        return;
    }
    case NodeKind::Add: {
        bool first = true;
        for (const auto& k : e->kids) {
            Expr positive;
            bool negative = term_negative(k, positive);
            if (first) {
                render_rec(k, os);
                first = false;
                continue;
            }
            if (negative) {
                os << " - ";
                render_rec(positive, os);
            } else {
                os << " + ";
                render_rec(k, os);
            }
        }
        return;
    }
    }
}

} // namespace

std::string render(const Expr& e)
{
    std::ostringstream os;
    render_rec(e, os);
    return os.str();
}

// ---- evaluation -------------------------------------------------------------

namespace {

double eval_rec(const Expr& e, const std::map<std::string, double>& env, double eps)
{
    switch (e->kind) {
    case NodeKind::Num:
        return to_double(e->num);
    case NodeKind::Sym: {
        auto it = env.find(e->sym);
        if (it == env.end())
            throw EvalError(EvalError::Kind::Domain, "unassigned symbol '" + e->sym + "'");
        return it->second;
    }
    case NodeKind::Add: {
        double s = 0;
        for (const auto& k : e->kids)
            s += eval_rec(k, env, eps);
        return s;
    }
    case NodeKind::Mul: {
        double p = 1;
        for (const auto& k : e->kids)
            p *= eval_rec(k, env, eps);
        return p;
    }
    case NodeKind::Pow: {
        double b = eval_rec(e->kids[0], env, eps);
        const Rat* q = as_num(e->kids[1]);
        if (q && is_integer(*q)) {
            if (*q < 0 && std::fabs(b) < eps)
                throw EvalError(EvalError::Kind::NearZeroDivisor,
                                "division by a near-zero value");
            double r = std::pow(b, to_double(*q));
            if (!std::isfinite(r))
                throw EvalError(EvalError::Kind::NonFinite, "non-finite power");
            return r;
        }
        double x = eval_rec(e->kids[1], env, eps);
        if (b < eps)
            throw EvalError(EvalError::Kind::Domain,
                            "power of a non-positive base");
        double r = std::pow(b, x);
        if (!std::isfinite(r))
            throw EvalError(EvalError::Kind::NonFinite, "non-finite power");
        return r;
    }
    case NodeKind::Fun: {
        double u = eval_rec(e->kids[0], env, eps);
        double r = 0;
        switch (e->fn) {
        case FunKind::Exp:
            r = std::exp(u);
            break;
        case FunKind::Log:
            if (u < eps)
                throw EvalError(EvalError::Kind::Domain, "log of a non-positive value");
            r = std::log(u);
            break;
        case FunKind::Sin:
            r = std::sin(u);
            break;
        case FunKind::Cos:
            r = std::cos(u);
            break;
        }
        if (!std::isfinite(r))
            throw EvalError(EvalError::Kind::NonFinite, "non-finite function value");
        return r;
    }
    }
    throw EvalError(EvalError::Kind::Domain, "malformed expression");
}

} // namespace

double evaluate(const Expr& e, const std::map<std::string, double>& env, double eps_sing)
{
    double v = eval_rec(e, env, eps_sing);
    if (!std::isfinite(v))
        throw EvalError(EvalError::Kind::NonFinite, "non-finite result");
    return v;
}

// ---- probabilistic zero test -------------------------------------------------

namespace {

std::map<std::string, double> draw_point(rng::Stream& stream, const SymbolTable& symbols)
{
    std::map<std::string, double> point;
    for (const auto& v : symbols.dyn_vars()) {
        Interval iv = symbols.domain_of(v);
        point[v] = stream.uniform(iv.lo, iv.hi);
    }
    {
        Interval iv = symbols.domain_of(symbols.time_var());
        point[symbols.time_var()] = stream.uniform(iv.lo, iv.hi);
    }
    for (const auto& w : symbols.noise_vars()) {
        Interval iv = symbols.domain_of(w);
        point[w] = stream.uniform(iv.lo, iv.hi);
    }
    for (const auto& p : symbols.params()) {
        if (p.fixed)
            point[p.name] = *p.fixed;
        else
            point[p.name] = stream.uniform(p.range.lo, p.range.hi);
    }
    return point;
}

} // namespace

ZeroCheck is_zero(const Expr& e, const SampleSpec& spec, const SymbolTable& symbols)
{
    rng::Stream stream(spec.seed);
    const long budget = 100L * spec.point_count;
    long attempts = 0;
    int points = 0;
    const std::vector<Expr> terms =
        e->kind == NodeKind::Add ? e->kids : std::vector<Expr>{e};

    while (points < spec.point_count) {
        if (attempts >= budget)
            throw SamplingExhausted("could not find " + std::to_string(spec.point_count) +
                                    " valid sample points in " + std::to_string(budget) +
                                    " attempts");
        ++attempts;
        auto point = draw_point(stream, symbols);
        double value = 0, scale = 0;
        try {
            for (const auto& t : terms)
                scale = std::max(scale, std::fabs(evaluate(t, point, spec.eps_sing)));
            value = evaluate(e, point, spec.eps_sing);
        } catch (const EvalError&) {
            continue;
        }
        ++points;
        double threshold = spec.eps_zero * (1.0 + std::max(1.0, scale));
        if (std::fabs(value) > threshold) {
            Witness w;
            w.point = std::move(point);
            w.value = value;
            w.scale = scale;
            return ZeroCheck{false, std::move(w), points};
        }
    }
    return ZeroCheck{true, std::nullopt, points};
}

std::vector<std::map<std::string, double>> sample_valid_points(
    int count, const std::vector<Expr>& guards, const SampleSpec& spec,
    const SymbolTable& symbols)
{
    rng::Stream stream(spec.seed);
    const long budget = 100L * count;
    long attempts = 0;
    std::vector<std::map<std::string, double>> points;
    while (static_cast<int>(points.size()) < count) {
        if (attempts >= budget)
            throw SamplingExhausted("could not find " + std::to_string(count) +
                                    " valid sample points in " + std::to_string(budget) +
                                    " attempts");
        ++attempts;
        auto point = draw_point(stream, symbols);
        bool ok = true;
        for (const auto& g : guards) {
            try {
                evaluate(g, point, spec.eps_sing);
            } catch (const EvalError&) {
                ok = false;
                break;
            }
        }
        if (ok)
            points.push_back(std::move(point));
    }
    return points;
}

// ---- antiderivative ----------------------------------------------------------

namespace {

// u must be affine in v: u = a*v + b with a, b free of v and a nonzero.
bool affine_in(const Expr& u, const std::string& v, Expr& a, Expr& b)
{
    Expr da = differentiate(u, v);
    if (contains_symbol(da, v) || is_num(da, Rat(0)))
        return false;
    a = da;
    b = simplify(sub(u, mul(a, make_sym(v))));
    if (contains_symbol(b, v))
        return false;
    return true;
}

std::optional<Expr> anti_term(const Expr& term, const std::string& v)
{
    std::vector<Expr> factors =
        term->kind == NodeKind::Mul ? term->kids : std::vector<Expr>{term};
    std::vector<Expr> coeff;
    std::vector<Expr> dep;
    for (const auto& f : factors) {
        if (contains_symbol(f, v))
            dep.push_back(f);
        else
            coeff.push_back(f);
    }
    Expr c = make_mul(coeff);
    if (dep.empty())
        return simplify(mul(c, make_sym(v)));
    if (dep.size() != 1)
        return std::nullopt;
    const Expr& u = dep[0];

    if (u->kind == NodeKind::Sym && u->sym == v)
        return simplify(make_mul({make_num(Rat(1, 2)), c, make_pow(u, make_num(2))}));

    if (u->kind == NodeKind::Pow) {
        const Expr& base = u->kids[0];
        const Rat* n = as_num(u->kids[1]);
        if (base->kind == NodeKind::Sym && base->sym == v && n) {
            if (*n == -1)
                return simplify(mul(c, make_fun(FunKind::Log, base)));
            Rat np1 = *n + 1;
            return simplify(make_mul(
                {make_num(Rat(1) / np1), c, make_pow(base, make_num(np1))}));
        }
        if (n && *n == -1) {
            Expr a, b;
            if (affine_in(base, v, a, b))
                return simplify(
                    make_mul({c, make_pow(a, make_num(-1)), make_fun(FunKind::Log, base)}));
        }
        return std::nullopt;
    }

    if (u->kind == NodeKind::Fun && u->fn == FunKind::Exp) {
        Expr a, b;
        if (affine_in(u->kids[0], v, a, b))
            return simplify(make_mul({c, make_pow(a, make_num(-1)), u}));
    }
    return std::nullopt;
}

} // namespace

std::optional<Expr> antiderivative(const Expr& e, const std::string& v)
{
    Expr s = simplify(e);
    std::vector<Expr> terms = s->kind == NodeKind::Add ? s->kids : std::vector<Expr>{s};
    std::vector<Expr> pieces;
    pieces.reserve(terms.size());
    for (const auto& t : terms) {
        auto p = anti_term(t, v);
        if (!p)
            return std::nullopt;
        pieces.push_back(*p);
    }
    return simplify(make_add(std::move(pieces)));
}

} // namespace sdesym
