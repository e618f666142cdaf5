#include "sdesym/convert.hpp"

namespace sdesym {

std::vector<Expr> stratonovich_shift(const SdeSystem& sys)
{
    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();
    std::vector<Expr> out;
    out.reserve(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        std::vector<Expr> parts;
        for (std::size_t k = 0; k < noises.size(); ++k) {
            for (std::size_t j = 0; j < vars.size(); ++j)
                parts.push_back(
                    make_mul({differentiate(sys.noise[i][k], vars[j]), sys.noise[j][k]}));
            parts.push_back(differentiate(sys.noise[i][k], noises[k]));
        }
        out.push_back(simplify(make_mul({make_num(Rat(1, 2)), make_add(std::move(parts))})));
    }
    return out;
}

SdeSystem to_stratonovich(const SdeSystem& sys)
{
    if (sys.calculus != Calculus::Ito)
        throw ModelError("to_stratonovich needs an Ito system", 0);
    SdeSystem out = sys;
    out.calculus = Calculus::Stratonovich;
    auto shift = stratonovich_shift(sys);
    for (std::size_t i = 0; i < out.drift.size(); ++i)
        out.drift[i] = simplify(sub(sys.drift[i], shift[i]));
    return out;
}

SdeSystem to_ito(const SdeSystem& sys)
{
    if (sys.calculus != Calculus::Stratonovich)
        throw ModelError("to_ito needs a Stratonovich system", 0);
    SdeSystem out = sys;
    out.calculus = Calculus::Ito;
    auto shift = stratonovich_shift(sys);
    for (std::size_t i = 0; i < out.drift.size(); ++i)
        out.drift[i] = simplify(add(sys.drift[i], shift[i]));
    return out;
}

Expr persistence_condition(const SdeSystem& sys, const VectorField& X)
{
    if (sys.symbols.n_dyn() != 1 || sys.symbols.n_noise() != 1)
        throw ModelError("the persistence condition is defined for scalar systems", 0);
    if (X.action.kind != NoiseAction::Kind::Matrix)
        throw ModelError("the persistence condition needs a constant noise scaling", 0);
    const std::string& x = sys.symbols.dyn_vars()[0];
    const std::string& w = sys.symbols.noise_vars()[0];
    const Expr& sigma = sys.noise[0][0];
    Rat r = X.action.R[0][0];
    return simplify(make_mul({make_num(r), make_add({differentiate(sigma, w),
                                                     make_mul({sigma, differentiate(sigma, x)})})}));
}

NormalizeNoiseResult normalize_noise(const SdeSystem& sys, const SampleSpec& spec)
{
    if (sys.calculus != Calculus::Ito)
        throw ModelError("normalize_noise needs an Ito system", 0);
    if (sys.symbols.n_dyn() != 1 || sys.symbols.n_noise() != 1)
        throw ModelError("normalize_noise applies to scalar systems", 0);
    if (!sys.proper())
        throw ModelError("normalize_noise needs a proper equation whose coefficients do not "
                         "read the noise: for generalized equations no substitution "
                         "xi = int dx/sigma can reach a unit noise coefficient",
                         0);
    const std::string& x = sys.symbols.dyn_vars()[0];
    Expr integrand = simplify(div(one_expr(), sys.noise[0][0]));
    auto xi = antiderivative(integrand, x);
    if (!xi)
        throw TransformError("normalize_noise: 1/sigma = " + render(integrand) +
                             " is outside the antiderivative table");

    NormalizeNoiseResult out;
    if (struct_equal(simplify(*xi), make_sym(x))) {
        out.sub = identity_substitution(sys);
        out.system = sys;
        return out;
    }

    SubstitutionSpec sspec;
    sspec.name = "unit-noise";
    std::string yname = sys.symbols.contains("y") ? "ynorm" : "y";
    sspec.new_names = {yname};
    sspec.forward = {simplify(*xi)};
    auto inverse = invert_monotone(*xi, x, yname);
    if (!inverse)
        throw TransformError("normalize_noise: could not invert xi = " + render(*xi));
    sspec.inverse = {{x, *inverse}};
    {
        auto points = sample_valid_points(64, {*xi}, spec, sys.symbols);
        double lo = 0, hi = 0;
        bool first = true;
        for (const auto& p : points) {
            double v = evaluate(*xi, p, spec.eps_sing);
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
        }
        if (hi - lo > 1e-9) {
            double pad = 0.05 * (hi - lo);
            sspec.domains = {{yname, Interval{lo + pad, hi - pad}}};
        }
    }
    out.sub = make_substitution(sys, sspec, spec);
    out.system = ito_change_of_vars(sys, out.sub);
    auto unit = is_zero(sub(out.system.noise[0][0], one_expr()), spec, out.system.symbols);
    if (!unit.zero)
        throw TransformError("normalize_noise: transformed noise coefficient is not 1");
    return out;
}

// ---- group actions -------------------------------------------------------

GroupElement GroupElement::dilation(Expr lambda, std::vector<Rat> var_exps,
                                    std::vector<Rat> noise_exps)
{
    GroupElement g;
    g.kind = Kind::Dilation;
    g.lambda = std::move(lambda);
    g.var_exponents = std::move(var_exps);
    g.noise_exponents = std::move(noise_exps);
    return g;
}

GroupElement GroupElement::rotation(std::vector<std::vector<Expr>> matrix,
                                    std::vector<std::string> var_block,
                                    std::vector<std::string> noise_block)
{
    GroupElement g;
    g.kind = Kind::Rotation;
    g.matrix = std::move(matrix);
    g.var_block = std::move(var_block);
    g.noise_block = std::move(noise_block);
    return g;
}

namespace {

SdeSystem apply_dilation(const SdeSystem& sys, const GroupElement& g)
{
    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();
    if (g.var_exponents.size() != vars.size() || g.noise_exponents.size() != noises.size())
        throw ModelError("dilation exponent count does not match the system", 0);

    auto scale = [&](const Rat& q) { return make_pow(g.lambda, make_num(q)); };

    std::map<std::string, Expr> bind;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (g.var_exponents[i] != 0)
            bind[vars[i]] = make_mul({scale(g.var_exponents[i]), make_sym(vars[i])});
    for (std::size_t k = 0; k < noises.size(); ++k)
        if (g.noise_exponents[k] != 0)
            bind[noises[k]] = make_mul({scale(g.noise_exponents[k]), make_sym(noises[k])});

    SdeSystem out = sys;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        // lambda^{-e_i} f^i(lambda^e x, t, lambda^d w)
        out.drift[i] =
            simplify(make_mul({scale(-g.var_exponents[i]), substitute(sys.drift[i], bind)}));
        for (std::size_t k = 0; k < noises.size(); ++k) {
            // the rescaled noise differential is discharged onto sigma
            out.noise[i][k] = simplify(
                make_mul({scale(g.noise_exponents[k] - g.var_exponents[i]),
                          substitute(sys.noise[i][k], bind)}));
        }
    }
    return out;
}

SdeSystem apply_rotation(const SdeSystem& sys, const GroupElement& g, const SampleSpec& spec)
{
    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();
    const std::size_t m = g.matrix.size();
    if (g.var_block.size() != m || g.noise_block.size() != m)
        throw ModelError("rotation blocks must match the matrix size", 0);
    for (const auto& row : g.matrix)
        if (row.size() != m)
            throw ModelError("rotation matrix is not square", 0);

    // M^T M = 1, verified entrywise (entries may be parametric).
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            std::vector<Expr> dot;
            for (std::size_t k = 0; k < m; ++k)
                dot.push_back(make_mul({g.matrix[k][i], g.matrix[k][j]}));
            Expr expect = i == j ? one_expr() : zero_expr();
            Expr residual = simplify(sub(make_add(std::move(dot)), expect));
            if (!is_zero(residual, spec, sys.symbols).zero)
                throw ModelError("rotation matrix is not orthogonal (entry " +
                                     std::to_string(i) + "," + std::to_string(j) +
                                     " residual " + render(residual) + ")",
                                 0);
        }

    const std::size_t n = vars.size(), q = noises.size();
    // Full-size matrices: identity outside the rotated blocks.
    std::vector<std::vector<Expr>> V(n, std::vector<Expr>(n, zero_expr()));
    std::vector<std::vector<Expr>> W(q, std::vector<Expr>(q, zero_expr()));
    for (std::size_t i = 0; i < n; ++i)
        V[i][i] = one_expr();
    for (std::size_t k = 0; k < q; ++k)
        W[k][k] = one_expr();
    std::vector<std::size_t> vi, ni;
    for (const auto& v : g.var_block)
        vi.push_back(sys.symbols.dyn_index(v));
    for (const auto& w : g.noise_block)
        ni.push_back(sys.symbols.noise_index(w));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            V[vi[a]][vi[b]] = g.matrix[a][b];
            W[ni[a]][ni[b]] = g.matrix[a][b];
        }

    // Substitute x -> V x, w -> W w into the coefficients.
    std::map<std::string, Expr> bind;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Expr> row;
        for (std::size_t j = 0; j < n; ++j)
            row.push_back(make_mul({V[i][j], make_sym(vars[j])}));
        bind[vars[i]] = make_add(std::move(row));
    }
    for (std::size_t k = 0; k < q; ++k) {
        std::vector<Expr> row;
        for (std::size_t l = 0; l < q; ++l)
            row.push_back(make_mul({W[k][l], make_sym(noises[l])}));
        bind[noises[k]] = make_add(std::move(row));
    }

    std::vector<Expr> fsub(n);
    std::vector<std::vector<Expr>> ssub(n, std::vector<Expr>(q));
    for (std::size_t i = 0; i < n; ++i) {
        fsub[i] = substitute(sys.drift[i], bind);
        for (std::size_t k = 0; k < q; ++k)
            ssub[i][k] = substitute(sys.noise[i][k], bind);
    }

    // V dx = f(Vx, t, Ww) dt + sigma(Vx, t, Ww) W dw, so
    // new f = V^T fsub and new sigma = V^T ssub W.
    SdeSystem out = sys;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Expr> parts;
        for (std::size_t j = 0; j < n; ++j)
            parts.push_back(make_mul({V[j][i], fsub[j]}));
        out.drift[i] = simplify(make_add(std::move(parts)));
        for (std::size_t k = 0; k < q; ++k) {
            std::vector<Expr> acc;
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t l = 0; l < q; ++l)
                    acc.push_back(make_mul({V[j][i], ssub[j][l], W[l][k]}));
            out.noise[i][k] = simplify(make_add(std::move(acc)));
        }
    }
    return out;
}

} // namespace

SdeSystem apply_group_element(const SdeSystem& sys, const GroupElement& g,
                              const SampleSpec& spec)
{
    if (g.kind == GroupElement::Kind::Dilation)
        return apply_dilation(sys, g);
    return apply_rotation(sys, g, spec);
}

} // namespace sdesym
