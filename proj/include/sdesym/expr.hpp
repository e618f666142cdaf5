#pragma once

#include "sdesym/rational.hpp"
#include "sdesym/symbols.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdesym {

enum class NodeKind { Num, Sym, Add, Mul, Pow, Fun };
enum class FunKind { Exp, Log, Sin, Cos };

class Node;
using Expr = std::shared_ptr<const Node>;

// Immutable expression tree node. Sums and products are flattened and hold at
// most one rational constant; construction goes through the make_* helpers
// which enforce the canonical form.
class Node {
public:
    NodeKind kind;
    Rat num;                // Num
    std::string sym;        // Sym
    FunKind fn = FunKind::Exp; // Fun
    std::vector<Expr> kids; // Add/Mul operands; Pow {base, exponent}; Fun {arg}
    std::size_t hash = 0;
};

Expr make_num(Rat r);
Expr make_num(long long n);
Expr make_sym(std::string name);
Expr make_add(std::vector<Expr> terms);
Expr make_mul(std::vector<Expr> factors);
Expr make_pow(Expr base, Expr exponent);
Expr make_fun(FunKind fn, Expr arg);

Expr zero_expr();
Expr one_expr();

inline Expr add(Expr a, Expr b) { return make_add({std::move(a), std::move(b)}); }
inline Expr sub(Expr a, Expr b)
{
    return make_add({std::move(a), make_mul({make_num(-1), std::move(b)})});
}
inline Expr mul(Expr a, Expr b) { return make_mul({std::move(a), std::move(b)}); }
inline Expr div(Expr a, Expr b)
{
    return make_mul({std::move(a), make_pow(std::move(b), make_num(-1))});
}
inline Expr neg(Expr a) { return make_mul({make_num(-1), std::move(a)}); }

bool struct_equal(const Expr& a, const Expr& b);
int compare(const Expr& a, const Expr& b); // total order used for canonical sorting

bool is_num(const Expr& e);
bool is_num(const Expr& e, const Rat& value);
const Rat* as_num(const Expr& e);

bool contains_symbol(const Expr& e, const std::string& name);
void collect_symbols(const Expr& e, std::set<std::string>& out);

// Best-effort, value-preserving normalization: constant folding, expansion of
// products over sums, like-term collection, power and exponential merging.
Expr simplify(const Expr& e);

// Exact partial derivative with respect to a symbol, simplified.
Expr differentiate(const Expr& e, const std::string& v);

// Simultaneous substitution of symbols, then canonicalization.
Expr substitute(const Expr& e, const std::map<std::string, Expr>& bindings);

// Canonical text form; parse(render(e)) is structurally equal to e.
std::string render(const Expr& e);

struct EvalError : std::runtime_error {
    enum class Kind { Domain, NearZeroDivisor, NonFinite };
    EvalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
    Kind kind;
};

double evaluate(const Expr& e, const std::map<std::string, double>& env,
                double eps_sing = 1e-6);

// ---- probabilistic zero test -------------------------------------------

struct Witness {
    std::map<std::string, double> point;
    double value = 0.0;
    double scale = 0.0;
};

struct ZeroCheck {
    bool zero = false;
    std::optional<Witness> witness; // present when zero == false
    int points_used = 0;
};

struct SamplingExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Samples seeded random points in the declared domains; points hitting a
// domain or near-zero-divisor guard are discarded and resampled. True iff
// |e(p)| <= eps_zero * (1 + max(1, |scale(p)|)) at every retained point,
// where scale(p) is the largest additive term of e at p.
ZeroCheck is_zero(const Expr& e, const SampleSpec& spec, const SymbolTable& symbols);

// Draw guarded sample points at which every expression in `guards` evaluates
// cleanly (used by the collocation search); throws SamplingExhausted after
// 100x the requested count of rejected attempts.
std::vector<std::map<std::string, double>> sample_valid_points(
    int count, const std::vector<Expr>& guards, const SampleSpec& spec,
    const SymbolTable& symbols);

// ---- restricted antiderivative ------------------------------------------

// Table-driven antiderivative in v, by linearity over the terms
//   c, c*v^n (n rational, n != -1), c/v, c*exp(a*v+b), c/(a*v+b)
// with c, a, b free of v. Returns nullopt when a term matches no row.
std::optional<Expr> antiderivative(const Expr& e, const std::string& v);

// ---- parser ---------------------------------------------------------------

struct ParseError : std::runtime_error {
    ParseError(std::string msg, std::size_t offset_)
        : std::runtime_error(std::move(msg)), offset(offset_)
    {
    }
    std::size_t offset;
};

// Parses the expression grammar; every identifier must resolve in `symbols`.
Expr parse(const std::string& text, const SymbolTable& symbols);

// Parse against an explicit set of allowed names (used while building tables).
Expr parse_with_names(const std::string& text, const std::set<std::string>& names);

} // namespace sdesym
