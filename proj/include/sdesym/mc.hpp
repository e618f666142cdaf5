#pragma once

#include "sdesym/model.hpp"
#include "sdesym/transform.hpp"

#include <cstdint>
#include <iosfwd>

namespace sdesym {

// Expression compiled to a postfix tape over a fixed slot layout, for the hot
// loops of the simulator.
class CompiledExpr {
public:
    CompiledExpr() = default;
    CompiledExpr(const Expr& e, const std::vector<std::string>& slot_names);

    // Returns NaN when a guard (log/sqrt/power domain, near-zero divisor)
    // trips; callers treat non-finite values as an invalid path.
    double eval(const double* slots) const;

private:
    enum class Op : std::uint8_t { Const, Load, Add2, Mul2, PowI, PowGen, Exp, Log, Sin, Cos, Neg };
    struct Step {
        Op op;
        int arg = 0;
        double val = 0;
    };
    std::vector<Step> tape_;
    mutable std::vector<double> stack_;
};

struct Grid {
    double t0 = 0.0;
    double h = 1.0 / 256;
    long steps = 256;
};

enum class DomainPolicy { ExcludePath, ClipAndFlag };

// Euler-Maruyama trajectories with shared, counter-derived Wiener increments:
// increment (path, step, noise) is a pure function of the seed, so runs are
// reproducible and different systems can be driven by identical noise.
struct PathBatch {
    Grid grid;
    std::uint64_t seed = 0;
    std::vector<std::string> var_names, noise_names;
    long n_paths = 0;
    const char* scheme = "euler-maruyama";

    // layout: [path][step(+1)][component]
    std::vector<double> increments; // paths x steps x noises
    std::vector<double> wiener;     // paths x (steps+1) x noises, cumulative
    std::vector<double> states;     // paths x (steps+1) x vars
    std::vector<char> valid;        // per path
    long excluded = 0;
    long clipped = 0;

    double state(long path, long step, std::size_t var) const
    {
        return states[(path * (grid.steps + 1) + step) * var_names.size() + var];
    }
    double noise_value(long path, long step, std::size_t k) const
    {
        return wiener[(path * (grid.steps + 1) + step) * noise_names.size() + k];
    }
    double increment(long path, long step, std::size_t k) const
    {
        return increments[(path * grid.steps + step) * noise_names.size() + k];
    }
};

struct McError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

PathBatch simulate(const SdeSystem& sys, const std::vector<double>& init, const Grid& grid,
                   long paths, std::uint64_t seed,
                   DomainPolicy policy = DomainPolicy::ExcludePath, double clip_floor = 0.0);

struct SummaryStats {
    std::vector<double> mean;   // per variable, at final time
    std::vector<double> stderr_; // standard error of the mean
    long paths_used = 0;
};

SummaryStats final_time_summary(const PathBatch& batch);

// Simulates the original and the transformed system on shared increments and
// compares the transformed states against Psi(x, t, w), at step sizes h, h/2
// and h/4. Decreasing RMS indicates the transform and the simulator agree.
struct TransformCheckReport {
    std::vector<double> h_values;
    std::vector<double> rms;
    std::vector<double> ratios; // rms[i] / rms[i+1]
    long excluded = 0;
};

TransformCheckReport pathwise_transform_check(const SdeSystem& sys, const Substitution& sub,
                                              const SdeSystem& transformed, const Grid& grid,
                                              long paths, std::uint64_t seed,
                                              const std::vector<double>& init = {});

// Linear-drift benchmark: x(t) = x0 e^{lambda t} + mu e^{lambda t}
// int_0^t e^{-lambda s} dw(s), with the stochastic integral taken as a
// left-point sum on the same increments as the simulation.
struct ClosedFormReport {
    std::vector<double> h_values;
    std::vector<double> rms;
    std::vector<double> ratios;
};

ClosedFormReport closed_form_check_linear(double lambda, double mu, double x0,
                                          const Grid& grid, long paths, std::uint64_t seed);

// Columnar CSV: path,step,t,<vars...>,<noises...> with shortest round-trip
// decimals.
void write_csv(const PathBatch& batch, std::ostream& os);

} // namespace sdesym
