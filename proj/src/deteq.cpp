#include "sdesym/deteq.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace sdesym {

Expr ito_laplacian(const Expr& e, const SdeSystem& sys)
{
    if (sys.calculus != Calculus::Ito)
        throw ModelError("the Ito Laplacian needs an Ito system", 0);
    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();
    std::vector<Expr> parts;

    // d2/dw^i dw^i
    for (const auto& w : noises)
        parts.push_back(differentiate(differentiate(e, w), w));

    // 2 sigma^i_j d2/dx^i dw^j
    for (std::size_t i = 0; i < vars.size(); ++i) {
        Expr dxi = differentiate(e, vars[i]);
        for (std::size_t j = 0; j < noises.size(); ++j) {
            const Expr& s = sys.noise[i][j];
            if (is_num(s, Rat(0)))
                continue;
            parts.push_back(make_mul({make_num(2), s, differentiate(dxi, noises[j])}));
        }
    }

    // sum_k sigma^i_k sigma^j_k d2/dx^i dx^j
    for (std::size_t i = 0; i < vars.size(); ++i) {
        Expr dxi = differentiate(e, vars[i]);
        for (std::size_t j = 0; j < vars.size(); ++j) {
            Expr dd = differentiate(dxi, vars[j]);
            if (is_num(dd, Rat(0)))
                continue;
            std::vector<Expr> coef;
            for (std::size_t k = 0; k < noises.size(); ++k)
                coef.push_back(make_mul({sys.noise[i][k], sys.noise[j][k]}));
            parts.push_back(make_mul({make_add(std::move(coef)), dd}));
        }
    }
    return simplify(make_add(std::move(parts)));
}

namespace {

void require_shared_symbols(const SdeSystem& sys, const VectorField& X)
{
    if (!sys.symbols.same_layout(X.symbols))
        throw ModelError("system and field live on different variable spaces", 0);
}

Expr half() { return make_num(Rat(1, 2)); }

// Laplacian of xi for the general one-dimensional form; needs the same noise
// coefficient as the system.
Expr scalar_laplacian(const Expr& e, const Expr& sigma, const std::string& x,
                      const std::string& w)
{
    Expr eww = differentiate(differentiate(e, w), w);
    Expr exw = differentiate(differentiate(e, x), w);
    Expr exx = differentiate(differentiate(e, x), x);
    return simplify(make_add({eww, make_mul({make_num(2), sigma, exw}),
                              make_mul({sigma, sigma, exx})}));
}

} // namespace

ResidualSet build_residuals_scalar(const SdeSystem& sys, const VectorField& X)
{
    require_shared_symbols(sys, X);
    if (sys.symbols.n_dyn() != 1 || sys.symbols.n_noise() != 1)
        throw ModelError("scalar residual builder needs one variable and one noise", 0);

    const std::string& x = sys.symbols.dyn_vars()[0];
    const std::string& t = sys.symbols.time_var();
    const std::string& w = sys.symbols.noise_vars()[0];
    const Expr& f = sys.drift[0];
    const Expr& sigma = sys.noise[0][0];
    const Expr& phi = X.phi[0];
    Expr xi = X.action.components(X.symbols)[0];

    ResidualSet out;
    out.calculus = sys.calculus;
    out.scalar_form = true;

    // The second determining equation is shared by both calculi:
    //   phi_w + sigma phi_x - phi sigma_x - sigma xi_w - xi sigma_w - sigma^2 xi_x
    Expr r2 = simplify(make_add(
        {differentiate(phi, w), make_mul({sigma, differentiate(phi, x)}),
         neg(make_mul({phi, differentiate(sigma, x)})),
         neg(make_mul({sigma, differentiate(xi, w)})),
         neg(make_mul({xi, differentiate(sigma, w)})),
         neg(make_mul({sigma, sigma, differentiate(xi, x)}))}));
    out.noise = {{r2}};

    if (sys.calculus == Calculus::Ito) {
        // phi_t + f phi_x - phi f_x + (1/2) Lap(phi) - xi f_w - A,
        // A = sigma f xi_x + sigma xi_t + (1/2) sigma Lap(xi)
        Expr lap_phi = scalar_laplacian(phi, sigma, x, w);
        Expr a = make_add({make_mul({sigma, f, differentiate(xi, x)}),
                           make_mul({sigma, differentiate(xi, t)}),
                           make_mul({half(), sigma, scalar_laplacian(xi, sigma, x, w)})});
        Expr r1 = simplify(make_add(
            {differentiate(phi, t), make_mul({f, differentiate(phi, x)}),
             neg(make_mul({phi, differentiate(f, x)})), make_mul({half(), lap_phi}),
             neg(make_mul({xi, differentiate(f, w)})), neg(a)}));
        out.drift = {r1};
    } else {
        if (X.action.kind != NoiseAction::Kind::Matrix)
            throw ModelError(
                "general noise actions are only supported for Ito systems", 0);
        // phi_t + b phi_x - phi b_x - r w b_w
        Expr r1 = simplify(make_add(
            {differentiate(phi, t), make_mul({f, differentiate(phi, x)}),
             neg(make_mul({phi, differentiate(f, x)})),
             neg(make_mul({xi, differentiate(f, w)}))}));
        out.drift = {r1};
    }
    return out;
}

ResidualSet build_residuals_ndim(const SdeSystem& sys, const VectorField& X)
{
    require_shared_symbols(sys, X);
    if (X.action.kind != NoiseAction::Kind::Matrix)
        throw ModelError("the n-dimensional determining equations need a constant R matrix",
                         0);

    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();
    const std::string& t = sys.symbols.time_var();
    const auto& R = X.action.R;

    ResidualSet out;
    out.calculus = sys.calculus;
    out.scalar_form = false;

    auto r_w_hatderiv = [&](const Expr& g) {
        // sum_{j,l} R^j_l w^l dg/dw^j
        std::vector<Expr> parts;
        for (std::size_t j = 0; j < noises.size(); ++j) {
            Expr dj = differentiate(g, noises[j]);
            if (is_num(dj, Rat(0)))
                continue;
            for (std::size_t l = 0; l < noises.size(); ++l) {
                if (R[j][l] == 0)
                    continue;
                parts.push_back(make_mul({make_num(R[j][l]), make_sym(noises[l]), dj}));
            }
        }
        return make_add(std::move(parts));
    };

    for (std::size_t i = 0; i < vars.size(); ++i) {
        std::vector<Expr> parts;
        parts.push_back(differentiate(X.phi[i], t));
        for (std::size_t j = 0; j < vars.size(); ++j) {
            parts.push_back(make_mul({sys.drift[j], differentiate(X.phi[i], vars[j])}));
            parts.push_back(neg(make_mul({X.phi[j], differentiate(sys.drift[i], vars[j])})));
        }
        if (sys.calculus == Calculus::Ito)
            parts.push_back(make_mul({half(), ito_laplacian(X.phi[i], sys)}));
        parts.push_back(neg(r_w_hatderiv(sys.drift[i])));
        out.drift.push_back(simplify(make_add(std::move(parts))));
    }

    for (std::size_t i = 0; i < vars.size(); ++i) {
        std::vector<Expr> row;
        for (std::size_t k = 0; k < noises.size(); ++k) {
            std::vector<Expr> parts;
            parts.push_back(differentiate(X.phi[i], noises[k]));
            for (std::size_t j = 0; j < vars.size(); ++j) {
                parts.push_back(make_mul({sys.noise[j][k], differentiate(X.phi[i], vars[j])}));
                parts.push_back(
                    neg(make_mul({X.phi[j], differentiate(sys.noise[i][k], vars[j])})));
            }
            for (std::size_t j = 0; j < noises.size(); ++j) {
                if (R[j][k] == 0)
                    continue;
                parts.push_back(neg(make_mul({sys.noise[i][j], make_num(R[j][k])})));
            }
            parts.push_back(neg(r_w_hatderiv(sys.noise[i][k])));
            row.push_back(simplify(make_add(std::move(parts))));
        }
        out.noise.push_back(std::move(row));
    }
    return out;
}

ResidualSet build_residuals(const SdeSystem& sys, const VectorField& X)
{
    if (sys.symbols.n_dyn() == 1 && sys.symbols.n_noise() == 1)
        return build_residuals_scalar(sys, X);
    return build_residuals_ndim(sys, X);
}

SymmetryReport check_symmetry(const SdeSystem& sys, const VectorField& X,
                              const SampleSpec& spec)
{
    ResidualSet rs = build_residuals(sys, X);
    SymmetryReport report;
    report.cls = classify(X);
    report.symmetry = true;

    const auto& vars = sys.symbols.dyn_vars();
    const auto& noises = sys.symbols.noise_vars();

    for (std::size_t i = 0; i < rs.drift.size(); ++i) {
        ResidualStatus st;
        st.label = "drift[" + vars[i] + "]";
        st.residual = rs.drift[i];
        ZeroCheck z = is_zero(rs.drift[i], spec, sys.symbols);
        st.pass = z.zero;
        st.witness = z.witness;
        report.symmetry = report.symmetry && st.pass;
        report.entries.push_back(std::move(st));
    }
    for (std::size_t i = 0; i < rs.noise.size(); ++i) {
        for (std::size_t k = 0; k < rs.noise[i].size(); ++k) {
            ResidualStatus st;
            st.label = "noise[" + vars[i] + "][" + noises[k] + "]";
            st.residual = rs.noise[i][k];
            ZeroCheck z = is_zero(rs.noise[i][k], spec, sys.symbols);
            st.pass = z.zero;
            st.witness = z.witness;
            report.symmetry = report.symmetry && st.pass;
            report.entries.push_back(std::move(st));
        }
    }
    return report;
}

namespace {

std::vector<Expr> flatten_residuals(const ResidualSet& rs)
{
    std::vector<Expr> out = rs.drift;
    for (const auto& row : rs.noise)
        out.insert(out.end(), row.begin(), row.end());
    return out;
}

// Nearest small rational to v (continued fractions), or nullopt.
std::optional<Rat> snap_rational(double v, double tol = 1e-6, long long max_den = 4096)
{
    if (!std::isfinite(v))
        return std::nullopt;
    double x = v;
    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    for (int i = 0; i < 40; ++i) {
        double fl = std::floor(x);
        long long a = static_cast<long long>(fl);
        long long p2 = a * p1 + p0;
        long long q2 = a * q1 + q0;
        if (q2 > max_den)
            break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        double approx = static_cast<double>(p1) / static_cast<double>(q1);
        if (std::fabs(approx - v) <= tol * std::max(1.0, std::fabs(v)))
            return Rat(p1, q1);
        double rem = x - fl;
        if (rem < 1e-12)
            break;
        x = 1.0 / rem;
    }
    return std::nullopt;
}

} // namespace

std::vector<VectorField> find_symmetries_ansatz(
    const SdeSystem& sys, const std::vector<std::vector<Expr>>& basis,
    const std::vector<std::vector<Rat>>& R, const SampleSpec& spec)
{
    const std::size_t n = sys.symbols.n_dyn();
    if (basis.size() != n)
        throw ModelError("ansatz basis needs one list per dynamical variable", 0);

    std::vector<std::pair<std::size_t, std::size_t>> slots; // (var, basis index)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < basis[i].size(); ++a)
            slots.emplace_back(i, a);
    const std::size_t m = slots.size();
    if (m == 0)
        return {};

    auto field_for = [&](const std::vector<Expr>& phi) {
        VectorField X;
        X.name = "ansatz";
        X.symbols = sys.symbols;
        X.phi = phi;
        X.action = NoiseAction::matrix(R);
        return X;
    };

    // Residuals for the zero field capture the part independent of the
    // coefficients; unit fields give the columns of the linear map.
    std::vector<Expr> zero_phi(n, zero_expr());
    std::vector<Expr> base = flatten_residuals(build_residuals(sys, field_for(zero_phi)));
    std::vector<std::vector<Expr>> columns;
    for (const auto& [i, a] : slots) {
        auto phi = zero_phi;
        phi[i] = basis[i][a];
        auto res = flatten_residuals(build_residuals(sys, field_for(phi)));
        for (std::size_t r = 0; r < res.size(); ++r)
            res[r] = simplify(sub(res[r], base[r]));
        columns.push_back(std::move(res));
    }

    const std::size_t n_res = base.size();
    const int n_points = static_cast<int>(3 * m + 8);

    std::vector<Expr> guards = base;
    for (const auto& col : columns)
        guards.insert(guards.end(), col.begin(), col.end());
    auto points = sample_valid_points(n_points, guards, spec, sys.symbols);

    Eigen::MatrixXd A(static_cast<long>(n_points * n_res), static_cast<long>(m));
    Eigen::VectorXd rhs(static_cast<long>(n_points * n_res));
    long row = 0;
    for (const auto& p : points) {
        for (std::size_t r = 0; r < n_res; ++r) {
            for (std::size_t c = 0; c < m; ++c)
                A(row, static_cast<long>(c)) = evaluate(columns[c][r], p, spec.eps_sing);
            rhs(row) = -evaluate(base[r], p, spec.eps_sing);
            ++row;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    double cutoff = 1e-8 * std::max(smax, 1e-300);

    std::vector<Eigen::VectorXd> candidates;
    bool homogeneous = rhs.lpNorm<Eigen::Infinity>() <= 1e-10 * std::max(1.0, smax);
    Eigen::VectorXd particular = Eigen::VectorXd::Zero(static_cast<long>(m));
    if (!homogeneous) {
        svd.setThreshold(1e-8);
        particular = svd.solve(rhs);
        candidates.push_back(particular);
    }
    for (long j = 0; j < svd.matrixV().cols(); ++j) {
        if (j < svd.singularValues().size() && svd.singularValues()(j) >= cutoff)
            continue;
        Eigen::VectorXd v = svd.matrixV().col(j);
        candidates.push_back(homogeneous ? v : Eigen::VectorXd(particular + v));
    }

    std::vector<VectorField> found;
    int counter = 0;
    for (const auto& cand : candidates) {
        // Normalize by the largest entry and snap to small rationals; the
        // final check_symmetry pass is the arbiter.
        double scale = cand.lpNorm<Eigen::Infinity>();
        if (scale < 1e-10)
            continue;
        double pivot = 0;
        for (long j = 0; j < cand.size(); ++j)
            if (std::fabs(cand(j)) > std::fabs(pivot) * (1 + 1e-12))
                pivot = cand(j);
        std::vector<Expr> phi(n, zero_expr());
        bool ok = true;
        for (std::size_t c = 0; c < m; ++c) {
            double val = cand(static_cast<long>(c)) / pivot;
            auto r = snap_rational(val);
            if (!r) {
                ok = false;
                break;
            }
            if (*r == 0)
                continue;
            auto [i, a] = slots[c];
            phi[i] = simplify(add(phi[i], mul(make_num(*r), basis[i][a])));
        }
        if (!ok)
            continue;
        VectorField X = field_for(phi);
        X.name = "ansatz" + std::to_string(++counter);
        if (check_symmetry(sys, X, spec).symmetry) {
            bool duplicate = false;
            for (const auto& prev : found) {
                bool same = true;
                for (std::size_t i = 0; i < n && same; ++i)
                    same = struct_equal(simplify(prev.phi[i]), simplify(X.phi[i]));
                duplicate = duplicate || same;
            }
            if (!duplicate)
                found.push_back(std::move(X));
        }
    }
    return found;
}

} // namespace sdesym
