#include "sdesym/mc.hpp"

#include "sdesym/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

namespace sdesym {

namespace {

constexpr double kGuardEps = 1e-12;

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

} // namespace

CompiledExpr::CompiledExpr(const Expr& e, const std::vector<std::string>& slot_names)
{
    std::map<std::string, int> slot_of;
    for (std::size_t i = 0; i < slot_names.size(); ++i)
        slot_of[slot_names[i]] = static_cast<int>(i);

    std::function<void(const Expr&)> emit = [&](const Expr& n) {
        switch (n->kind) {
        case NodeKind::Num:
            tape_.push_back({Op::Const, 0, to_double(n->num)});
            return;
        case NodeKind::Sym: {
            auto it = slot_of.find(n->sym);
            if (it == slot_of.end())
                throw McError("expression uses symbol '" + n->sym +
                              "' which has no simulation slot (fix all parameters)");
            tape_.push_back({Op::Load, it->second, 0});
            return;
        }
        case NodeKind::Add:
            emit(n->kids[0]);
            for (std::size_t i = 1; i < n->kids.size(); ++i) {
                emit(n->kids[i]);
                tape_.push_back({Op::Add2, 0, 0});
            }
            return;
        case NodeKind::Mul:
            emit(n->kids[0]);
            for (std::size_t i = 1; i < n->kids.size(); ++i) {
                emit(n->kids[i]);
                tape_.push_back({Op::Mul2, 0, 0});
            }
            return;
        case NodeKind::Pow: {
            emit(n->kids[0]);
            const Rat* q = as_num(n->kids[1]);
            if (q && is_integer(*q) && *q >= -16 && *q <= 16) {
                tape_.push_back({Op::PowI, static_cast<int>(to_double(*q)), 0});
                return;
            }
            emit(n->kids[1]);
            tape_.push_back({Op::PowGen, 0, 0});
            return;
        }
        case NodeKind::Fun:
            emit(n->kids[0]);
            switch (n->fn) {
            case FunKind::Exp: tape_.push_back({Op::Exp, 0, 0}); return;
            case FunKind::Log: tape_.push_back({Op::Log, 0, 0}); return;
            case FunKind::Sin: tape_.push_back({Op::Sin, 0, 0}); return;
            case FunKind::Cos: tape_.push_back({Op::Cos, 0, 0}); return;
            }
        }
    };
    emit(e);
    stack_.resize(tape_.size() + 1);
}

double CompiledExpr::eval(const double* slots) const
{
    double* sp = stack_.data();
    for (const auto& step : tape_) {
        switch (step.op) {
        case Op::Const:
            *sp++ = step.val;
            break;
        case Op::Load:
            *sp++ = slots[step.arg];
            break;
        case Op::Add2:
            sp[-2] += sp[-1];
            --sp;
            break;
        case Op::Mul2:
            sp[-2] *= sp[-1];
            --sp;
            break;
        case Op::PowI: {
            double b = sp[-1];
            int n = step.arg;
            if (n < 0 && std::fabs(b) < kGuardEps) {
                sp[-1] = nan_value();
                break;
            }
            double acc = 1.0;
            double base = n < 0 ? 1.0 / b : b;
            for (int i = std::abs(n); i > 0; --i)
                acc *= base;
            sp[-1] = acc;
            break;
        }
        case Op::PowGen: {
            double b = sp[-2], x = sp[-1];
            --sp;
            sp[-1] = b <= 0 ? nan_value() : std::pow(b, x);
            break;
        }
        case Op::Exp:
            sp[-1] = std::exp(sp[-1]);
            break;
        case Op::Log:
            sp[-1] = sp[-1] <= 0 ? nan_value() : std::log(sp[-1]);
            break;
        case Op::Sin:
            sp[-1] = std::sin(sp[-1]);
            break;
        case Op::Cos:
            sp[-1] = std::cos(sp[-1]);
            break;
        }
    }
    return sp[-1];
}

namespace {

// Slot layout shared by all compiled coefficients: vars, t, noises, params.
std::vector<std::string> slot_names(const SymbolTable& table)
{
    return table.all_names();
}

std::vector<double> param_values(const SymbolTable& table)
{
    std::vector<double> out;
    for (const auto& p : table.params()) {
        if (!p.fixed)
            throw McError("parameter '" + p.name +
                          "' needs a fixed value for simulation (use 'param " + p.name +
                          " = <value>' or --param)");
        out.push_back(*p.fixed);
    }
    return out;
}

} // namespace

PathBatch simulate(const SdeSystem& sys, const std::vector<double>& init, const Grid& grid,
                   long paths, std::uint64_t seed, DomainPolicy policy, double clip_floor)
{
    if (sys.calculus != Calculus::Ito)
        throw McError("the simulator integrates Ito systems; convert first");
    if (paths <= 0)
        throw McError("path count must be positive");
    if (grid.steps <= 0 || !(grid.h > 0))
        throw McError("grid needs a positive step size and step count");
    const auto& table = sys.symbols;
    const std::size_t nv = table.n_dyn();
    const std::size_t nw = table.n_noise();
    if (init.size() != nv)
        throw McError("initial state needs one value per dynamical variable");

    auto names = slot_names(table);
    std::vector<CompiledExpr> drift, noise;
    for (std::size_t i = 0; i < nv; ++i) {
        drift.emplace_back(sys.drift[i], names);
        for (std::size_t k = 0; k < nw; ++k)
            noise.emplace_back(sys.noise[i][k], names);
    }
    auto params = param_values(table);

    PathBatch batch;
    batch.grid = grid;
    batch.seed = seed;
    batch.var_names = table.dyn_vars();
    batch.noise_names = table.noise_vars();
    batch.n_paths = paths;
    batch.increments.assign(static_cast<std::size_t>(paths) * grid.steps * nw, 0.0);
    batch.wiener.assign(static_cast<std::size_t>(paths) * (grid.steps + 1) * nw, 0.0);
    batch.states.assign(static_cast<std::size_t>(paths) * (grid.steps + 1) * nv, 0.0);
    batch.valid.assign(static_cast<std::size_t>(paths), 1);

    const double sqrt_h = std::sqrt(grid.h);
    std::vector<double> slots(names.size(), 0.0);
    const std::size_t t_slot = nv;

    for (long p = 0; p < paths; ++p) {
        double* st = &batch.states[static_cast<std::size_t>(p) * (grid.steps + 1) * nv];
        double* wn = &batch.wiener[static_cast<std::size_t>(p) * (grid.steps + 1) * nw];
        double* dw = &batch.increments[static_cast<std::size_t>(p) * grid.steps * nw];
        std::copy(init.begin(), init.end(), st);
        std::fill(wn, wn + nw, 0.0);

        bool ok = true;
        for (long n = 0; n < grid.steps; ++n) {
            const double* x = st + n * nv;
            const double* w = wn + n * nw;
            for (std::size_t k = 0; k < nw; ++k)
                dw[n * nw + k] =
                    rng::normal(seed, static_cast<std::uint64_t>(p),
                                static_cast<std::uint64_t>(n), k) *
                    sqrt_h;

            std::copy(x, x + nv, slots.begin());
            slots[t_slot] = grid.t0 + n * grid.h;
            std::copy(w, w + nw, slots.begin() + t_slot + 1);
            std::copy(params.begin(), params.end(), slots.begin() + t_slot + 1 + nw);

            double* xn = st + (n + 1) * nv;
            for (std::size_t i = 0; i < nv && ok; ++i) {
                double fi = drift[i].eval(slots.data());
                double xi = x[i] + fi * grid.h;
                for (std::size_t k = 0; k < nw; ++k)
                    xi += noise[i * nw + k].eval(slots.data()) * dw[n * nw + k];
                if (!std::isfinite(xi)) {
                    ok = false;
                    break;
                }
                if (policy == DomainPolicy::ClipAndFlag && xi < clip_floor) {
                    xi = clip_floor;
                    ++batch.clipped;
                }
                xn[i] = xi;
            }
            for (std::size_t k = 0; k < nw; ++k)
                wn[(n + 1) * nw + k] = w[k] + dw[n * nw + k];
            if (!ok)
                break;
        }
        if (!ok) {
            batch.valid[static_cast<std::size_t>(p)] = 0;
            ++batch.excluded;
        }
    }
    if (batch.excluded == paths)
        throw McError("every path left the coefficient domain; nothing to report");
    return batch;
}

SummaryStats final_time_summary(const PathBatch& batch)
{
    const std::size_t nv = batch.var_names.size();
    SummaryStats s;
    s.mean.assign(nv, 0.0);
    s.stderr_.assign(nv, 0.0);
    for (long p = 0; p < batch.n_paths; ++p) {
        if (!batch.valid[static_cast<std::size_t>(p)])
            continue;
        ++s.paths_used;
        for (std::size_t i = 0; i < nv; ++i)
            s.mean[i] += batch.state(p, batch.grid.steps, i);
    }
    if (s.paths_used == 0)
        return s;
    for (std::size_t i = 0; i < nv; ++i)
        s.mean[i] /= static_cast<double>(s.paths_used);
    std::vector<double> var(nv, 0.0);
    for (long p = 0; p < batch.n_paths; ++p) {
        if (!batch.valid[static_cast<std::size_t>(p)])
            continue;
        for (std::size_t i = 0; i < nv; ++i) {
            double d = batch.state(p, batch.grid.steps, i) - s.mean[i];
            var[i] += d * d;
        }
    }
    for (std::size_t i = 0; i < nv; ++i)
        s.stderr_[i] = s.paths_used > 1
                           ? std::sqrt(var[i] / (s.paths_used - 1) / s.paths_used)
                           : 0.0;
    return s;
}

TransformCheckReport pathwise_transform_check(const SdeSystem& sys, const Substitution& sub,
                                              const SdeSystem& transformed, const Grid& grid,
                                              long paths, std::uint64_t seed,
                                              const std::vector<double>& init)
{
    TransformCheckReport report;
    const auto& table = sys.symbols;
    const std::size_t nv = table.n_dyn();
    const std::size_t nw = table.n_noise();

    auto names = slot_names(table);
    std::vector<CompiledExpr> forward;
    for (std::size_t i = 0; i < nv; ++i)
        forward.emplace_back(sub.forward[i], names);
    auto params = param_values(table);

    Grid level = grid;
    std::vector<double> x0 = init.empty() ? std::vector<double>(nv, 1.0) : init;
    if (x0.size() != nv)
        throw McError("initial state needs one value per dynamical variable");

    for (int lv = 0; lv < 3; ++lv) {
        PathBatch xb = simulate(sys, x0, level, paths, seed);

        std::vector<double> slots(names.size(), 0.0);
        std::copy(x0.begin(), x0.end(), slots.begin());
        slots[nv] = level.t0;
        std::copy(params.begin(), params.end(), slots.begin() + nv + 1 + nw);
        std::vector<double> y0(nv, 0.0);
        for (std::size_t i = 0; i < nv; ++i) {
            y0[i] = forward[i].eval(slots.data());
            if (!std::isfinite(y0[i]))
                throw McError("the forward map is undefined at the initial point");
        }

        PathBatch yb = simulate(transformed, y0, level, paths, seed);

        double sum = 0;
        long used = 0;
        for (long p = 0; p < paths; ++p) {
            if (!xb.valid[static_cast<std::size_t>(p)] ||
                !yb.valid[static_cast<std::size_t>(p)])
                continue;
            std::copy(&xb.states[(static_cast<std::size_t>(p) * (level.steps + 1) +
                                  level.steps) * nv],
                      &xb.states[(static_cast<std::size_t>(p) * (level.steps + 1) +
                                  level.steps) * nv] + nv,
                      slots.begin());
            slots[nv] = level.t0 + level.steps * level.h;
            for (std::size_t k = 0; k < nw; ++k)
                slots[nv + 1 + k] = xb.noise_value(p, level.steps, k);
            double err2 = 0;
            bool finite = true;
            for (std::size_t i = 0; i < nv; ++i) {
                double psi = forward[i].eval(slots.data());
                double d = yb.state(p, level.steps, i) - psi;
                if (!std::isfinite(d)) {
                    finite = false;
                    break;
                }
                err2 += d * d;
            }
            if (!finite)
                continue;
            sum += err2;
            ++used;
        }
        if (used == 0)
            throw McError("no commonly valid paths at h = " + std::to_string(level.h));
        report.excluded += paths - used;
        report.h_values.push_back(level.h);
        report.rms.push_back(std::sqrt(sum / static_cast<double>(used)));

        level.h /= 2;
        level.steps *= 2;
    }
    for (std::size_t i = 0; i + 1 < report.rms.size(); ++i) {
        double a = report.rms[i], b = report.rms[i + 1];
        if (b == 0)
            report.ratios.push_back(a == 0 ? 1.0
                                           : std::numeric_limits<double>::infinity());
        else
            report.ratios.push_back(a / b);
    }
    return report;
}

ClosedFormReport closed_form_check_linear(double lambda, double mu, double x0,
                                          const Grid& grid, long paths, std::uint64_t seed)
{
    SymbolTable table({"x"}, "t", {"w"},
                      {ParamDecl{"lambda", {lambda - 1, lambda + 1}, lambda},
                       ParamDecl{"mu", {mu - 1, mu + 1}, mu}});
    SdeSystem sys;
    sys.symbols = table;
    sys.calculus = Calculus::Ito;
    sys.drift = {parse("lambda*x", table)};
    sys.noise = {{parse("mu", table)}};

    ClosedFormReport report;
    Grid level = grid;
    for (int lv = 0; lv < 3; ++lv) {
        PathBatch b = simulate(sys, {x0}, level, paths, seed);
        const double T = level.t0 + level.steps * level.h;
        double sum = 0;
        long used = 0;
        for (long p = 0; p < paths; ++p) {
            if (!b.valid[static_cast<std::size_t>(p)])
                continue;
            // left-point Ito sum of e^{-lambda s} dw(s)
            double integral = 0;
            for (long n = 0; n < level.steps; ++n)
                integral += std::exp(-lambda * (level.t0 + n * level.h)) * b.increment(p, n, 0);
            double closed = x0 * std::exp(lambda * (T - level.t0)) +
                            mu * std::exp(lambda * T) * integral;
            double d = b.state(p, level.steps, 0) - closed;
            sum += d * d;
            ++used;
        }
        report.h_values.push_back(level.h);
        report.rms.push_back(std::sqrt(sum / static_cast<double>(used)));
        level.h /= 2;
        level.steps *= 2;
    }
    for (std::size_t i = 0; i + 1 < report.rms.size(); ++i) {
        double a = report.rms[i], b = report.rms[i + 1];
        report.ratios.push_back(b == 0 ? (a == 0 ? 1.0 : std::numeric_limits<double>::infinity())
                                       : a / b);
    }
    return report;
}

namespace {

void write_double(std::ostream& os, double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, ptr - buf);
}

} // namespace

void write_csv(const PathBatch& batch, std::ostream& os)
{
    os << "path,step,t";
    for (const auto& v : batch.var_names)
        os << ',' << v;
    for (const auto& w : batch.noise_names)
        os << ',' << w;
    os << '\n';
    const std::size_t nv = batch.var_names.size();
    const std::size_t nw = batch.noise_names.size();
    for (long p = 0; p < batch.n_paths; ++p) {
        if (!batch.valid[static_cast<std::size_t>(p)])
            continue;
        for (long n = 0; n <= batch.grid.steps; ++n) {
            os << p << ',' << n << ',';
            write_double(os, batch.grid.t0 + n * batch.grid.h);
            for (std::size_t i = 0; i < nv; ++i) {
                os << ',';
                write_double(os, batch.state(p, n, i));
            }
            for (std::size_t k = 0; k < nw; ++k) {
                os << ',';
                write_double(os, batch.noise_value(p, n, k));
            }
            os << '\n';
        }
    }
}

} // namespace sdesym
