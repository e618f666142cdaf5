#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdesym {

struct Interval {
    double lo = 0.2;
    double hi = 2.0;
};

struct ParamDecl {
    std::string name;
    Interval range{0.2, 2.0};
    std::optional<double> fixed;
};

enum class SymbolKind { Dynamical, Time, Noise, Parameter, Unknown };

// Declares the variable roles of a model: dynamical variables, the time
// variable, the driving noise variables and named parameters. Every symbol
// in any expression of a model must resolve here.
class SymbolTable {
public:
    SymbolTable() = default;
    SymbolTable(std::vector<std::string> dyn_vars, std::string time_var,
                std::vector<std::string> noise_vars, std::vector<ParamDecl> params = {});

    const std::vector<std::string>& dyn_vars() const { return dyn_vars_; }
    const std::string& time_var() const { return time_var_; }
    const std::vector<std::string>& noise_vars() const { return noise_vars_; }
    const std::vector<ParamDecl>& params() const { return params_; }

    std::size_t n_dyn() const { return dyn_vars_.size(); }
    std::size_t n_noise() const { return noise_vars_.size(); }

    SymbolKind kind_of(const std::string& name) const;
    bool contains(const std::string& name) const { return kind_of(name) != SymbolKind::Unknown; }
    std::size_t dyn_index(const std::string& name) const;
    std::size_t noise_index(const std::string& name) const;
    const ParamDecl* find_param(const std::string& name) const;

    void add_param(ParamDecl p);
    void set_domain(const std::string& name, Interval iv);
    Interval domain_of(const std::string& name) const;

    // All names in a stable order: dyn, time, noises, params.
    std::vector<std::string> all_names() const;

    // Table for a transformed model: fresh dynamical names, everything else kept.
    SymbolTable with_dyn_vars(std::vector<std::string> new_vars) const;

    bool same_layout(const SymbolTable& other) const;

private:
    void check_distinct() const;

    std::vector<std::string> dyn_vars_;
    std::string time_var_ = "t";
    std::vector<std::string> noise_vars_;
    std::vector<ParamDecl> params_;
    std::map<std::string, Interval> domains_;
};

// Controls the probabilistic zero test: how many points, the guards, the
// tolerance and the seed that makes runs reproducible.
struct SampleSpec {
    int point_count = 64;
    double eps_sing = 1e-6;
    double eps_zero = 1e-9;
    std::uint64_t seed = 42;
};

} // namespace sdesym
