#include "sdesym/transform.hpp"

#include <algorithm>

namespace sdesym {

bool Substitution::is_identity() const
{
    for (std::size_t i = 0; i < forward.size(); ++i) {
        Expr v = make_sym(old_table.dyn_vars()[i]);
        if (!struct_equal(simplify(forward[i]), v))
            return false;
    }
    return true;
}

std::map<std::string, Expr> Substitution::inverse_bindings() const
{
    std::map<std::string, Expr> out;
    for (std::size_t i = 0; i < inverse.size(); ++i)
        out[old_table.dyn_vars()[i]] = inverse[i];
    return out;
}

namespace {

// Symbol table that can evaluate mixed old/new expressions during validation.
SymbolTable joint_table(const SymbolTable& old_table, const SymbolTable& new_table)
{
    std::vector<std::string> vars = old_table.dyn_vars();
    for (const auto& v : new_table.dyn_vars())
        vars.push_back(v);
    SymbolTable joint(vars, old_table.time_var(), old_table.noise_vars(), old_table.params());
    for (const auto& v : old_table.dyn_vars())
        joint.set_domain(v, old_table.domain_of(v));
    for (const auto& v : new_table.dyn_vars())
        joint.set_domain(v, new_table.domain_of(v));
    joint.set_domain(old_table.time_var(), old_table.domain_of(old_table.time_var()));
    for (const auto& w : old_table.noise_vars())
        joint.set_domain(w, old_table.domain_of(w));
    return joint;
}

} // namespace

Substitution make_substitution(const SdeSystem& sys, const SubstitutionSpec& spec,
                               const SampleSpec& sample)
{
    const auto& old_table = sys.symbols;
    const auto& old_vars = old_table.dyn_vars();
    if (spec.new_names.size() != old_vars.size())
        throw TransformError("substitution '" + spec.name + "' must introduce exactly " +
                             std::to_string(old_vars.size()) + " new variables");
    for (const auto& nn : spec.new_names) {
        if (old_table.kind_of(nn) == SymbolKind::Noise || old_table.kind_of(nn) == SymbolKind::Time)
            throw TransformError(
                "substitution '" + spec.name + "' tries to replace '" + nn +
                "': transforms mixing the driving noises into the new dynamical "
                "variables are not supported, because the new driving process would "
                "not be a Wiener process and the result is not an Ito equation");
        if (old_table.contains(nn))
            throw TransformError("substitution '" + spec.name + "': new name '" + nn +
                                 "' clashes with an existing symbol");
    }
    if (spec.inverse.size() != old_vars.size())
        throw TransformError("substitution '" + spec.name + "' needs an inverse entry per "
                             "dynamical variable");

    Substitution result;
    result.new_names = spec.new_names;
    result.forward = spec.forward;
    result.old_table = old_table;
    result.new_table = old_table.with_dyn_vars(spec.new_names);
    for (const auto& [name, iv] : spec.domains)
        result.new_table.set_domain(name, iv);

    result.inverse.assign(old_vars.size(), zero_expr());
    for (const auto& [old_var, e] : spec.inverse) {
        auto it = std::find(old_vars.begin(), old_vars.end(), old_var);
        if (it == old_vars.end())
            throw TransformError("substitution '" + spec.name + "': unknown variable '" +
                                 old_var + "' in inverse");
        result.inverse[static_cast<std::size_t>(it - old_vars.begin())] = e;
    }

    // Mutual inverseness: Psi(Xi(y,t,w), t, w) = y, componentwise.
    SymbolTable joint = joint_table(old_table, result.new_table);
    std::map<std::string, Expr> bind = result.inverse_bindings();
    for (std::size_t i = 0; i < old_vars.size(); ++i) {
        Expr composed = substitute(result.forward[i], bind);
        Expr residual = simplify(sub(composed, make_sym(spec.new_names[i])));
        auto z = is_zero(residual, sample, joint);
        if (!z.zero)
            throw TransformError("substitution '" + spec.name + "': forward and inverse are "
                                 "not mutual inverses (component " +
                                 spec.new_names[i] + ", residual " + render(residual) + ")");
    }
    return result;
}

Substitution identity_substitution(const SdeSystem& sys)
{
    Substitution sub;
    sub.old_table = sys.symbols;
    sub.new_table = sys.symbols;
    sub.new_names = sys.symbols.dyn_vars();
    for (const auto& v : sys.symbols.dyn_vars()) {
        sub.forward.push_back(make_sym(v));
        sub.inverse.push_back(make_sym(v));
    }
    return sub;
}

// ---- inversion table ---------------------------------------------------------

namespace {

bool affine_parts(const Expr& u, const std::string& x, Expr& a, Expr& b)
{
    Expr da = differentiate(u, x);
    if (contains_symbol(da, x) || is_num(da, Rat(0)))
        return false;
    a = da;
    b = simplify(sub(u, mul(a, make_sym(x))));
    return !contains_symbol(b, x);
}

} // namespace

std::optional<Expr> invert_monotone(const Expr& psi, const std::string& x,
                                    const std::string& y)
{
    Expr s = simplify(psi);
    std::vector<Expr> terms = s->kind == NodeKind::Add ? s->kids : std::vector<Expr>{s};
    std::vector<Expr> shift; // x-free terms
    std::vector<Expr> dep;
    for (const auto& t : terms)
        (contains_symbol(t, x) ? dep : shift).push_back(t);
    if (dep.size() != 1)
        return std::nullopt;

    std::vector<Expr> factors =
        dep[0]->kind == NodeKind::Mul ? dep[0]->kids : std::vector<Expr>{dep[0]};
    std::vector<Expr> coeff;
    std::vector<Expr> core;
    for (const auto& f : factors)
        (contains_symbol(f, x) ? core : coeff).push_back(f);
    if (core.size() != 1)
        return std::nullopt;
    const Expr& u = core[0];

    // z = (y - shift) / coeff
    Expr z = simplify(div(sub(make_sym(y), make_add(shift)), make_mul(coeff)));

    if (u->kind == NodeKind::Sym && u->sym == x)
        return z;
    if (u->kind == NodeKind::Pow) {
        const Expr& base = u->kids[0];
        const Expr& q = u->kids[1];
        if (contains_symbol(q, x) || is_num(q, Rat(0)))
            return std::nullopt;
        Expr recip = as_num(q) ? make_num(Rat(1) / *as_num(q))
                               : make_pow(q, make_num(-1));
        Expr root = simplify(make_pow(z, recip));
        if (base->kind == NodeKind::Sym && base->sym == x)
            return root;
        Expr a, b;
        if (affine_parts(base, x, a, b))
            return simplify(div(sub(root, b), a));
        return std::nullopt;
    }
    if (u->kind == NodeKind::Fun && u->fn == FunKind::Exp) {
        Expr a, b;
        if (affine_parts(u->kids[0], x, a, b))
            return simplify(div(sub(make_fun(FunKind::Log, z), b), a));
        return std::nullopt;
    }
    if (u->kind == NodeKind::Fun && u->fn == FunKind::Log) {
        Expr a, b;
        if (affine_parts(u->kids[0], x, a, b))
            return simplify(div(sub(make_fun(FunKind::Exp, z), b), a));
        return std::nullopt;
    }
    return std::nullopt;
}

// ---- coordinate changes -------------------------------------------------------

namespace {

SdeSystem transformed_system(const SdeSystem& sys, const Substitution& sub, bool ito_rule)
{
    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();
    const std::string& t = sys.symbols.time_var();
    auto bind = sub.inverse_bindings();

    SdeSystem out;
    out.symbols = sub.new_table;
    out.calculus = sys.calculus;

    for (std::size_t i = 0; i < vars.size(); ++i) {
        const Expr& psi = sub.forward[i];
        std::vector<Expr> drift_parts{differentiate(psi, t)};
        for (std::size_t j = 0; j < vars.size(); ++j)
            drift_parts.push_back(make_mul({sys.drift[j], differentiate(psi, vars[j])}));
        if (ito_rule)
            drift_parts.push_back(make_mul({make_num(Rat(1, 2)), ito_laplacian(psi, sys)}));
        Expr F = substitute(simplify(make_add(std::move(drift_parts))), bind);
        for (const auto& v : vars)
            if (contains_symbol(F, v))
                throw TransformError("transformed drift still mentions the old variable '" +
                                     v + "'; the supplied inverse is incomplete");
        out.drift.push_back(F);

        std::vector<Expr> row;
        for (std::size_t k = 0; k < noises.size(); ++k) {
            std::vector<Expr> parts{differentiate(psi, noises[k])};
            for (std::size_t j = 0; j < vars.size(); ++j)
                parts.push_back(make_mul({sys.noise[j][k], differentiate(psi, vars[j])}));
            Expr S = substitute(simplify(make_add(std::move(parts))), bind);
            for (const auto& v : vars)
                if (contains_symbol(S, v))
                    throw TransformError(
                        "transformed noise still mentions the old variable '" + v + "'");
            row.push_back(S);
        }
        out.noise.push_back(std::move(row));
    }
    out.validate();
    return out;
}

} // namespace

SdeSystem ito_change_of_vars(const SdeSystem& sys, const Substitution& sub)
{
    if (sys.calculus != Calculus::Ito)
        throw TransformError("ito_change_of_vars needs an Ito system; Stratonovich systems "
                             "transform by the plain chain rule (strat_change_of_vars)");
    return transformed_system(sys, sub, /*ito_rule=*/true);
}

SdeSystem strat_change_of_vars(const SdeSystem& sys, const Substitution& sub)
{
    if (sys.calculus != Calculus::Stratonovich)
        throw TransformError("strat_change_of_vars needs a Stratonovich system");
    return transformed_system(sys, sub, /*ito_rule=*/false);
}

SdeSystem change_of_vars(const SdeSystem& sys, const Substitution& sub)
{
    return sys.calculus == Calculus::Ito ? ito_change_of_vars(sys, sub)
                                         : strat_change_of_vars(sys, sub);
}

// ---- Kozlov substitutions ------------------------------------------------------

namespace {

std::string fresh_var_name(const SymbolTable& table)
{
    if (!table.contains("y"))
        return "y";
    for (int i = 1;; ++i) {
        std::string cand = "y" + std::to_string(i);
        if (!table.contains(cand))
            return cand;
    }
}

// Derive a domain for the new variable by sampling the forward map.
Interval derive_domain(const Expr& forward, const SdeSystem& sys, const SampleSpec& spec)
{
    auto points = sample_valid_points(64, {forward}, spec, sys.symbols);
    double lo = 0, hi = 0;
    bool first = true;
    for (const auto& p : points) {
        double v = evaluate(forward, p, spec.eps_sing);
        lo = first ? v : std::min(lo, v);
        hi = first ? v : std::max(hi, v);
        first = false;
    }
    if (!(hi - lo > 1e-9)) {
        // essentially constant map; widen a touch around the value
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.05 * (hi - lo);
    return Interval{lo + pad, hi - pad};
}

Substitution scalar_substitution(const SdeSystem& sys, const std::string& name, Expr psi,
                                 const SampleSpec& spec)
{
    std::string yname = fresh_var_name(sys.symbols);
    Expr inverse = invert_monotone(psi, sys.symbols.dyn_vars()[0], yname)
                       .value_or(nullptr);
    if (!inverse)
        throw TransformError(name + ": could not invert y = " + render(psi) +
                             "; supply the substitution (forward and inverse) explicitly");
    SubstitutionSpec spec_out;
    spec_out.name = name;
    spec_out.new_names = {yname};
    spec_out.forward = {psi};
    spec_out.inverse = {{sys.symbols.dyn_vars()[0], inverse}};
    spec_out.domains = {{yname, derive_domain(psi, sys, spec)}};
    return make_substitution(sys, spec_out, spec);
}

void require_scalar(const SdeSystem& sys, const std::string& who)
{
    if (sys.symbols.n_dyn() != 1 || sys.symbols.n_noise() != 1)
        throw TransformError(who + " applies to scalar systems with a single noise");
}

} // namespace

KozlovResult kozlov(const SdeSystem& sys, const VectorField& X, const SampleSpec& spec)
{
    require_scalar(sys, "kozlov");
    if (!X.action.is_zero())
        throw TransformError("kozlov needs a standard symmetry (no action on the noises); "
                             "use modified_kozlov for split W-symmetries");
    const std::string& x = sys.symbols.dyn_vars()[0];
    Expr phi = simplify(X.phi[0]);
    auto integral = antiderivative(simplify(div(one_expr(), phi)), x);
    if (!integral)
        throw TransformError("kozlov: 1/phi = " + render(simplify(div(one_expr(), phi))) +
                             " is outside the antiderivative table; supply the substitution "
                             "explicitly and call the change of variables directly");
    KozlovResult out{scalar_substitution(sys, "kozlov", simplify(*integral), spec), {}};
    out.system = ito_change_of_vars(sys, out.sub);

    // When X really is a symmetry the new coefficients cannot depend on the
    // straightened variable.
    if (check_symmetry(sys, X, spec).symmetry) {
        const std::string& yname = out.sub.new_names[0];
        if (contains_symbol(out.system.drift[0], yname) ||
            contains_symbol(out.system.noise[0][0], yname))
            throw TransformError(
                "kozlov: transformed coefficients unexpectedly depend on the new variable");
    }
    return out;
}

ModifiedKozlovResult modified_kozlov(const SdeSystem& sys, const VectorField& X,
                                     const SampleSpec& spec)
{
    require_scalar(sys, "modified_kozlov");
    if (classify(X) != SymmetryClass::SplitW)
        throw TransformError("modified_kozlov needs a split W-symmetry: a nonzero noise "
                             "scaling r and a noise-free phi");
    Rat r = X.action.R[0][0];
    const std::string& x = sys.symbols.dyn_vars()[0];
    Expr phi = simplify(X.phi[0]);
    auto integral = antiderivative(simplify(div(one_expr(), phi)), x);
    if (!integral)
        throw TransformError("modified_kozlov: 1/phi is outside the antiderivative table");
    Expr psi = simplify(make_fun(FunKind::Exp, make_mul({make_num(r), *integral})));

    ModifiedKozlovResult out;
    out.sub = scalar_substitution(sys, "modified-kozlov", psi, spec);
    out.system = ito_change_of_vars(sys, out.sub);
    out.field = pushforward_field(X, out.sub);

    // The pushforward must be the scaling field r (y d_y + w d_w).
    Expr target = make_mul({make_num(r), make_sym(out.sub.new_names[0])});
    Expr residual = simplify(sub(out.field.phi[0], target));
    if (!is_zero(residual, spec, out.sub.new_table).zero)
        throw TransformError("modified_kozlov: pushforward is not the scaling form; residual " +
                             render(residual));
    return out;
}

Expr characteristic_chi(const VectorField& X)
{
    if (X.symbols.n_dyn() != 1 || X.symbols.n_noise() != 1)
        throw TransformError("characteristic_chi applies to scalar fields");
    if (classify(X) != SymmetryClass::SplitW)
        throw TransformError("characteristic_chi needs a split W-symmetry");
    Rat r = X.action.R[0][0];
    const std::string& x = X.symbols.dyn_vars()[0];
    const std::string& w = X.symbols.noise_vars()[0];
    auto integral = antiderivative(simplify(div(one_expr(), simplify(X.phi[0]))), x);
    if (!integral)
        throw TransformError("characteristic_chi: 1/phi is outside the antiderivative table");
    return simplify(make_mul(
        {make_sym(w), make_fun(FunKind::Exp, make_mul({make_num(-r), *integral}))}));
}

StraighteningReport straightening_check(const VectorField& X, const Expr& psi,
                                        const Expr& theta, const Expr& zeta,
                                        const SampleSpec& spec)
{
    StraighteningReport rep;
    rep.psi_residual = simplify(sub(X.apply(psi), one_expr()));
    rep.theta_residual = simplify(X.apply(theta));
    rep.zeta_residual = simplify(X.apply(zeta));
    rep.psi_pass = is_zero(rep.psi_residual, spec, X.symbols).zero;
    rep.theta_pass = is_zero(rep.theta_residual, spec, X.symbols).zero;
    rep.zeta_pass = is_zero(rep.zeta_residual, spec, X.symbols).zero;

    // A constant zeta cannot define a change of variables.
    bool depends = false;
    for (const auto& v : X.symbols.dyn_vars())
        depends = depends || contains_symbol(zeta, v);
    for (const auto& w : X.symbols.noise_vars())
        depends = depends || contains_symbol(zeta, w);
    rep.admissible = depends;
    return rep;
}

VectorField pushforward_field(const VectorField& X, const Substitution& sub)
{
    VectorField out;
    out.name = X.name;
    out.symbols = sub.new_table;
    auto bind = sub.inverse_bindings();
    for (std::size_t i = 0; i < sub.forward.size(); ++i)
        out.phi.push_back(substitute(X.apply(sub.forward[i]), bind));
    out.action = X.action; // (t, w) are fixed by the substitution
    if (out.action.kind == NoiseAction::Kind::General) {
        for (auto& xi : out.action.xi) {
            Expr moved = substitute(xi, bind);
            for (const auto& v : sub.old_table.dyn_vars())
                if (contains_symbol(moved, v))
                    throw TransformError("pushforward: general noise action depends on the "
                                         "old variables and cannot be carried over");
            xi = moved;
        }
    }
    out.validate();
    return out;
}

SymmetryReport post_transform_check(const SdeSystem& sys, const VectorField& X,
                                    const Substitution& sub, const SampleSpec& spec)
{
    SdeSystem moved = change_of_vars(sys, sub);
    VectorField pushed = pushforward_field(X, sub);
    return check_symmetry(moved, pushed, spec);
}

} // namespace sdesym
