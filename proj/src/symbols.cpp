#include "sdesym/symbols.hpp"

#include <algorithm>
#include <set>

namespace sdesym {

SymbolTable::SymbolTable(std::vector<std::string> dyn_vars, std::string time_var,
                         std::vector<std::string> noise_vars, std::vector<ParamDecl> params)
    : dyn_vars_(std::move(dyn_vars)),
      time_var_(std::move(time_var)),
      noise_vars_(std::move(noise_vars)),
      params_(std::move(params))
{
    if (dyn_vars_.empty())
        throw std::invalid_argument("a model needs at least one dynamical variable");
    check_distinct();
    for (const auto& p : params_) {
        if (!(p.range.lo < p.range.hi))
            throw std::invalid_argument("parameter '" + p.name + "' has an empty range");
        if (p.fixed && (*p.fixed < p.range.lo || *p.fixed > p.range.hi))
            throw std::invalid_argument("fixed value of parameter '" + p.name +
                                        "' lies outside its range");
    }
}

void SymbolTable::check_distinct() const
{
    std::set<std::string> seen;
    auto insert = [&](const std::string& n) {
        if (n.empty())
            throw std::invalid_argument("empty symbol name");
        if (!seen.insert(n).second)
            throw std::invalid_argument("duplicate symbol name '" + n + "'");
    };
    for (const auto& v : dyn_vars_)
        insert(v);
    insert(time_var_);
    for (const auto& w : noise_vars_)
        insert(w);
    for (const auto& p : params_)
        insert(p.name);
}

SymbolKind SymbolTable::kind_of(const std::string& name) const
{
    if (std::find(dyn_vars_.begin(), dyn_vars_.end(), name) != dyn_vars_.end())
        return SymbolKind::Dynamical;
    if (name == time_var_)
        return SymbolKind::Time;
    if (std::find(noise_vars_.begin(), noise_vars_.end(), name) != noise_vars_.end())
        return SymbolKind::Noise;
    if (find_param(name))
        return SymbolKind::Parameter;
    return SymbolKind::Unknown;
}

std::size_t SymbolTable::dyn_index(const std::string& name) const
{
    auto it = std::find(dyn_vars_.begin(), dyn_vars_.end(), name);
    if (it == dyn_vars_.end())
        throw std::invalid_argument("'" + name + "' is not a dynamical variable");
    return static_cast<std::size_t>(it - dyn_vars_.begin());
}

std::size_t SymbolTable::noise_index(const std::string& name) const
{
    auto it = std::find(noise_vars_.begin(), noise_vars_.end(), name);
    if (it == noise_vars_.end())
        throw std::invalid_argument("'" + name + "' is not a noise variable");
    return static_cast<std::size_t>(it - noise_vars_.begin());
}

const ParamDecl* SymbolTable::find_param(const std::string& name) const
{
    for (const auto& p : params_)
        if (p.name == name)
            return &p;
    return nullptr;
}

void SymbolTable::add_param(ParamDecl p)
{
    if (contains(p.name))
        throw std::invalid_argument("duplicate symbol name '" + p.name + "'");
    if (!(p.range.lo < p.range.hi))
        throw std::invalid_argument("parameter '" + p.name + "' has an empty range");
    params_.push_back(std::move(p));
}

void SymbolTable::set_domain(const std::string& name, Interval iv)
{
    if (!contains(name))
        throw std::invalid_argument("unknown symbol '" + name + "' in domain declaration");
    if (!(iv.lo < iv.hi))
        throw std::invalid_argument("degenerate domain for '" + name + "'");
    domains_[name] = iv;
}

Interval SymbolTable::domain_of(const std::string& name) const
{
    auto it = domains_.find(name);
    if (it != domains_.end())
        return it->second;
    if (const ParamDecl* p = find_param(name))
        return p->range;
    return Interval{};
}

std::vector<std::string> SymbolTable::all_names() const
{
    std::vector<std::string> out = dyn_vars_;
    out.push_back(time_var_);
    out.insert(out.end(), noise_vars_.begin(), noise_vars_.end());
    for (const auto& p : params_)
        out.push_back(p.name);
    return out;
}

SymbolTable SymbolTable::with_dyn_vars(std::vector<std::string> new_vars) const
{
    SymbolTable out(std::move(new_vars), time_var_, noise_vars_, params_);
    for (const auto& [name, iv] : domains_)
        if (out.contains(name))
            out.domains_[name] = iv;
    return out;
}

bool SymbolTable::same_layout(const SymbolTable& other) const
{
    return dyn_vars_ == other.dyn_vars_ && time_var_ == other.time_var_ &&
           noise_vars_ == other.noise_vars_;
}

} // namespace sdesym
