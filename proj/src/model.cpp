#include "sdesym/model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sdesym {

const char* to_string(Calculus c)
{
    return c == Calculus::Ito ? "ito" : "stratonovich";
}

void SdeSystem::validate() const
{
    if (drift.size() != symbols.n_dyn())
        throw ModelError("drift has " + std::to_string(drift.size()) + " entries for " +
                             std::to_string(symbols.n_dyn()) + " dynamical variables",
                         0);
    if (noise.size() != symbols.n_dyn())
        throw ModelError("noise matrix row count mismatch", 0);
    for (const auto& row : noise)
        if (row.size() != symbols.n_noise())
            throw ModelError("noise matrix column count mismatch", 0);
}

bool SdeSystem::proper() const
{
    for (const auto& w : symbols.noise_vars()) {
        for (const auto& f : drift)
            if (contains_symbol(f, w))
                return false;
        for (const auto& row : noise)
            for (const auto& s : row)
                if (contains_symbol(s, w))
                    return false;
    }
    return true;
}

SdeSystem SdeSystem::simplified() const
{
    SdeSystem out = *this;
    for (auto& f : out.drift)
        f = simplify(f);
    for (auto& row : out.noise)
        for (auto& s : row)
            s = simplify(s);
    return out;
}

NoiseAction NoiseAction::zero(std::size_t n_noise)
{
    NoiseAction a;
    a.kind = Kind::Matrix;
    a.R.assign(n_noise, std::vector<Rat>(n_noise, Rat(0)));
    return a;
}

NoiseAction NoiseAction::matrix(std::vector<std::vector<Rat>> entries)
{
    NoiseAction a;
    a.kind = Kind::Matrix;
    a.R = std::move(entries);
    return a;
}

NoiseAction NoiseAction::general(std::vector<Expr> xi)
{
    NoiseAction a;
    a.kind = Kind::General;
    a.xi = std::move(xi);
    return a;
}

bool NoiseAction::is_zero() const
{
    if (kind == Kind::Matrix) {
        for (const auto& row : R)
            for (const auto& e : row)
                if (e != 0)
                    return false;
        return true;
    }
    for (const auto& e : xi)
        if (!is_num(simplify(e), Rat(0)))
            return false;
    return true;
}

std::vector<Expr> NoiseAction::components(const SymbolTable& symbols) const
{
    if (kind == Kind::General)
        return xi;
    std::vector<Expr> out;
    out.reserve(symbols.n_noise());
    for (std::size_t k = 0; k < symbols.n_noise(); ++k) {
        std::vector<Expr> terms;
        for (std::size_t l = 0; l < symbols.n_noise(); ++l) {
            if (R[k][l] == 0)
                continue;
            terms.push_back(make_mul({make_num(R[k][l]), make_sym(symbols.noise_vars()[l])}));
        }
        out.push_back(make_add(std::move(terms)));
    }
    return out;
}

void VectorField::validate() const
{
    if (phi.size() != symbols.n_dyn())
        throw ModelError("field '" + name + "' has " + std::to_string(phi.size()) +
                             " components for " + std::to_string(symbols.n_dyn()) +
                             " dynamical variables",
                         0);
    if (action.kind == NoiseAction::Kind::Matrix) {
        if (action.R.size() != symbols.n_noise())
            throw ModelError("field '" + name + "': R matrix size mismatch", 0);
        for (const auto& row : action.R)
            if (row.size() != symbols.n_noise())
                throw ModelError("field '" + name + "': R matrix is not square", 0);
    } else if (action.xi.size() != symbols.n_noise()) {
        throw ModelError("field '" + name + "': xi component count mismatch", 0);
    }
}

Expr VectorField::apply(const Expr& e) const
{
    std::vector<Expr> parts;
    for (std::size_t i = 0; i < phi.size(); ++i)
        parts.push_back(make_mul({phi[i], differentiate(e, symbols.dyn_vars()[i])}));
    auto xi = action.components(symbols);
    for (std::size_t k = 0; k < xi.size(); ++k)
        parts.push_back(make_mul({xi[k], differentiate(e, symbols.noise_vars()[k])}));
    return simplify(make_add(std::move(parts)));
}

VectorField VectorField::simplified() const
{
    VectorField out = *this;
    for (auto& p : out.phi)
        p = simplify(p);
    if (out.action.kind == NoiseAction::Kind::General)
        for (auto& x : out.action.xi)
            x = simplify(x);
    return out;
}

const char* to_string(SymmetryClass c)
{
    switch (c) {
    case SymmetryClass::DeterministicStandard: return "deterministic-standard";
    case SymmetryClass::RandomStandard: return "random-standard";
    case SymmetryClass::SplitW: return "split-W";
    case SymmetryClass::GeneralW: return "general-W";
    }
    return "?";
}

namespace {

bool phi_reads_noise(const VectorField& X)
{
    for (const auto& w : X.symbols.noise_vars())
        for (const auto& p : X.phi)
            if (contains_symbol(p, w))
                return true;
    return false;
}

// Tries to express general xi components as R^k_l w^l with rational constants.
bool demote_to_matrix(const std::vector<Expr>& xi, const SymbolTable& symbols,
                      std::vector<std::vector<Rat>>& out)
{
    const auto& noises = symbols.noise_vars();
    out.assign(noises.size(), std::vector<Rat>(noises.size(), Rat(0)));
    for (std::size_t k = 0; k < xi.size(); ++k) {
        Expr e = simplify(xi[k]);
        std::vector<Expr> reconstructed;
        for (std::size_t l = 0; l < noises.size(); ++l) {
            Expr c = differentiate(e, noises[l]);
            const Rat* r = as_num(c);
            if (!r)
                return false;
            out[k][l] = *r;
            if (*r != 0)
                reconstructed.push_back(make_mul({c, make_sym(noises[l])}));
        }
        Expr rest = simplify(sub(e, make_add(std::move(reconstructed))));
        if (!is_num(rest, Rat(0)))
            return false;
    }
    return true;
}

} // namespace

SymmetryClass classify(const VectorField& X)
{
    NoiseAction act = X.action;
    if (act.kind == NoiseAction::Kind::General) {
        std::vector<std::vector<Rat>> R;
        if (demote_to_matrix(act.xi, X.symbols, R))
            act = NoiseAction::matrix(std::move(R));
    }
    bool w_in_phi = phi_reads_noise(X);
    if (act.kind == NoiseAction::Kind::General)
        return SymmetryClass::GeneralW;
    if (act.is_zero())
        return w_in_phi ? SymmetryClass::RandomStandard : SymmetryClass::DeterministicStandard;
    return w_in_phi ? SymmetryClass::GeneralW : SymmetryClass::SplitW;
}

VectorField lie_bracket(const VectorField& X, const VectorField& Y)
{
    if (!X.symbols.same_layout(Y.symbols))
        throw ModelError("lie_bracket: fields live on different variable spaces", 0);

    auto apply_to = [&](const VectorField& F, const Expr& g) { return F.apply(g); };

    VectorField out;
    out.name = "[" + X.name + "," + Y.name + "]";
    out.symbols = X.symbols;
    for (std::size_t i = 0; i < X.phi.size(); ++i)
        out.phi.push_back(simplify(sub(apply_to(X, Y.phi[i]), apply_to(Y, X.phi[i]))));

    auto xi_x = X.action.components(X.symbols);
    auto xi_y = Y.action.components(Y.symbols);
    std::vector<Expr> xi;
    for (std::size_t k = 0; k < xi_x.size(); ++k)
        xi.push_back(simplify(sub(apply_to(X, xi_y[k]), apply_to(Y, xi_x[k]))));

    std::vector<std::vector<Rat>> R;
    if (demote_to_matrix(xi, out.symbols, R))
        out.action = NoiseAction::matrix(std::move(R));
    else
        out.action = NoiseAction::general(std::move(xi));
    out.validate();
    return out;
}

const VectorField* ModelFile::find_field(const std::string& name) const
{
    for (const auto& f : fields)
        if (f.name == name)
            return &f;
    return nullptr;
}

const SubstitutionSpec* ModelFile::find_substitution(const std::string& name) const
{
    for (const auto& s : substitutions)
        if (s.name == name)
            return &s;
    return nullptr;
}

// ---- model file parsing -----------------------------------------------------

namespace {

std::string trim(const std::string& s)
{
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

std::vector<std::string> split_dots(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, '.'))
        out.push_back(trim(item));
    return out;
}

struct Line {
    int number;
    std::string key;
    std::string value;
};

struct Section {
    int number;
    std::string header; // e.g. "system", "field X", "substitution S"
    std::vector<Line> lines;
};

std::vector<Section> split_sections(const std::string& text)
{
    std::vector<Section> sections;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ModelError("malformed section header", lineno);
            sections.push_back(Section{lineno, trim(line.substr(1, line.size() - 2)), {}});
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ModelError("expected 'key = value'", lineno);
        if (sections.empty())
            throw ModelError("content before any section header", lineno);
        sections.back().lines.push_back(
            Line{lineno, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return sections;
}

double parse_double(const std::string& s, int lineno)
{
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ModelError("expected a number, got '" + s + "'", lineno);
    }
}

bool parse_range(const std::string& s, int lineno, Interval& out)
{
    std::string t = trim(s);
    if (t.rfind("range(", 0) != 0)
        return false;
    if (t.back() != ')')
        throw ModelError("malformed range(...)", lineno);
    auto inner = t.substr(6, t.size() - 7);
    auto parts = split_csv(inner);
    if (parts.size() != 2)
        throw ModelError("range needs two bounds", lineno);
    out.lo = parse_double(parts[0], lineno);
    out.hi = parse_double(parts[1], lineno);
    if (!(out.lo < out.hi))
        throw ModelError("range bounds must satisfy lo < hi", lineno);
    return true;
}

Rat parse_rational(const std::string& s, int lineno)
{
    try {
        Expr e = parse_with_names(s, {});
        e = simplify(e);
        if (const Rat* r = as_num(e))
            return *r;
    } catch (const ParseError&) {
    }
    throw ModelError("expected an exact rational constant, got '" + s + "'", lineno);
}

Expr parse_expr_or_rethrow(const std::string& s, const SymbolTable& table, int lineno)
{
    try {
        return parse(s, table);
    } catch (const ParseError& pe) {
        throw ModelError(std::string(pe.what()) + " at offset " + std::to_string(pe.offset) +
                             " in '" + s + "'",
                         lineno);
    }
}

std::string conformality_warning(const std::string& field,
                                 const std::vector<std::vector<Rat>>& R)
{
    std::size_t n = R.size();
    bool conformal = true;
    for (std::size_t i = 0; i < n && conformal; ++i)
        for (std::size_t j = 0; j < n && conformal; ++j) {
            if (i == j)
                continue;
            if (R[i][j] + R[j][i] != 0)
                conformal = false;
        }
    for (std::size_t i = 1; i < n && conformal; ++i)
        if (R[i][i] != R[0][0])
            conformal = false;
    if (conformal)
        return "";
    return "field '" + field +
           "': R is not in the conformal (rotation + dilation) algebra";
}

} // namespace

ModelFile load_model(const std::string& text)
{
    auto sections = split_sections(text);
    ModelFile out;

    auto sys_it = std::find_if(sections.begin(), sections.end(), [](const Section& s) {
        return s.header == "system";
    });
    if (sys_it == sections.end())
        throw ModelError("missing [system] section", 0);
    if (std::count_if(sections.begin(), sections.end(),
                      [](const Section& s) { return s.header == "system"; }) != 1)
        throw ModelError("exactly one [system] section is required", sys_it->number);

    // First pass over [system]: declarations.
    std::vector<std::string> vars, noises;
    std::string time_var = "t";
    std::vector<ParamDecl> params;
    Calculus calculus = Calculus::Ito;
    bool calculus_seen = false;
    std::vector<std::pair<std::string, Interval>> domains;

    for (const auto& line : sys_it->lines) {
        if (line.key == "vars") {
            vars = split_csv(line.value);
        } else if (line.key == "time") {
            time_var = line.value;
        } else if (line.key == "noises") {
            noises = split_csv(line.value);
        } else if (line.key == "calculus") {
            if (line.value == "ito")
                calculus = Calculus::Ito;
            else if (line.value == "stratonovich")
                calculus = Calculus::Stratonovich;
            else
                throw ModelError("calculus must be 'ito' or 'stratonovich'", line.number);
            calculus_seen = true;
        } else if (line.key.rfind("param ", 0) == 0) {
            ParamDecl p;
            p.name = trim(line.key.substr(6));
            Interval iv;
            if (parse_range(line.value, line.number, iv)) {
                p.range = iv;
            } else {
                double v = parse_double(line.value, line.number);
                p.fixed = v;
                p.range = Interval{v - 1.0, v + 1.0};
            }
            params.push_back(std::move(p));
        } else if (line.key.rfind("domain ", 0) == 0) {
            Interval iv;
            if (!parse_range(line.value, line.number, iv))
                throw ModelError("domain needs range(lo, hi)", line.number);
            domains.emplace_back(trim(line.key.substr(7)), iv);
        } else if (line.key.rfind("f.", 0) != 0 && line.key.rfind("sigma.", 0) != 0) {
            throw ModelError("unknown system entry '" + line.key + "'", line.number);
        }
    }
    if (vars.empty())
        throw ModelError("missing 'vars' declaration", sys_it->number);
    if (!calculus_seen)
        throw ModelError("missing 'calculus' declaration", sys_it->number);

    SymbolTable table(vars, time_var, noises, params);
    for (const auto& [name, iv] : domains) {
        if (!table.contains(name))
            throw ModelError("domain for unknown symbol '" + name + "'", sys_it->number);
        table.set_domain(name, iv);
    }

    // Second pass: coefficient expressions.
    std::vector<Expr> drift(vars.size());
    std::vector<std::vector<Expr>> noise(vars.size(),
                                         std::vector<Expr>(noises.size(), zero_expr()));
    std::vector<bool> drift_seen(vars.size(), false);

    for (const auto& line : sys_it->lines) {
        auto parts = split_dots(line.key);
        if (parts[0] == "f") {
            if (parts.size() != 2)
                throw ModelError("drift keys look like f.<var>", line.number);
            if (std::find(vars.begin(), vars.end(), parts[1]) == vars.end())
                throw ModelError("unknown dynamical variable '" + parts[1] + "'", line.number);
            std::size_t i = table.dyn_index(parts[1]);
            drift[i] = parse_expr_or_rethrow(line.value, table, line.number);
            drift_seen[i] = true;
        } else if (parts[0] == "sigma") {
            if (parts.size() != 3)
                throw ModelError("noise keys look like sigma.<var>.<noise>", line.number);
            if (std::find(vars.begin(), vars.end(), parts[1]) == vars.end())
                throw ModelError("unknown dynamical variable '" + parts[1] + "'", line.number);
            if (std::find(noises.begin(), noises.end(), parts[2]) == noises.end())
                throw ModelError("unknown noise variable '" + parts[2] + "'", line.number);
            noise[table.dyn_index(parts[1])][table.noise_index(parts[2])] =
                parse_expr_or_rethrow(line.value, table, line.number);
        }
    }
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (!drift_seen[i])
            throw ModelError("missing drift entry f." + vars[i], sys_it->number);

    out.system = SdeSystem{table, calculus, std::move(drift), std::move(noise)};
    out.system.validate();

    // Fields and substitutions.
    for (const auto& section : sections) {
        if (section.header == "system")
            continue;
        if (section.header.rfind("field", 0) == 0) {
            std::string name = trim(section.header.substr(5));
            if (name.empty())
                throw ModelError("field section needs a name: [field X]", section.number);
            VectorField f;
            f.name = name;
            f.symbols = table;
            f.phi.assign(vars.size(), zero_expr());
            std::vector<std::vector<Rat>> R(noises.size(),
                                            std::vector<Rat>(noises.size(), Rat(0)));
            std::vector<Expr> xi(noises.size(), zero_expr());
            bool has_general = false, has_matrix = false;
            for (const auto& line : section.lines) {
                auto parts = split_dots(line.key);
                if (parts[0] == "phi" && parts.size() == 2) {
                    if (parts[1] == time_var)
                        throw ModelError("symmetry generators do not act on the time variable",
                                         line.number);
                    if (std::find(vars.begin(), vars.end(), parts[1]) == vars.end())
                        throw ModelError("unknown dynamical variable '" + parts[1] + "'",
                                         line.number);
                    f.phi[table.dyn_index(parts[1])] =
                        parse_expr_or_rethrow(line.value, table, line.number);
                } else if (parts[0] == "R" && parts.size() == 3) {
                    if (std::find(noises.begin(), noises.end(), parts[1]) == noises.end() ||
                        std::find(noises.begin(), noises.end(), parts[2]) == noises.end())
                        throw ModelError("R entries look like R.<noise>.<noise>", line.number);
                    R[table.noise_index(parts[1])][table.noise_index(parts[2])] =
                        parse_rational(line.value, line.number);
                    has_matrix = true;
                } else if (parts[0] == "xi" && parts.size() == 2) {
                    if (std::find(noises.begin(), noises.end(), parts[1]) == noises.end())
                        throw ModelError("unknown noise variable '" + parts[1] + "'",
                                         line.number);
                    xi[table.noise_index(parts[1])] =
                        parse_expr_or_rethrow(line.value, table, line.number);
                    has_general = true;
                } else {
                    throw ModelError("unknown field entry '" + line.key + "'", line.number);
                }
            }
            if (has_general && has_matrix)
                throw ModelError("field '" + name + "' mixes R and xi noise actions",
                                 section.number);
            if (has_general)
                f.action = NoiseAction::general(std::move(xi));
            else
                f.action = NoiseAction::matrix(std::move(R));
            f.validate();
            if (f.action.kind == NoiseAction::Kind::Matrix) {
                std::string warn = conformality_warning(name, f.action.R);
                if (!warn.empty())
                    out.warnings.push_back(warn);
            }
            out.fields.push_back(std::move(f));
        } else if (section.header.rfind("substitution", 0) == 0) {
            std::string name = trim(section.header.substr(12));
            if (name.empty())
                throw ModelError("substitution section needs a name", section.number);
            SubstitutionSpec spec;
            spec.name = name;
            // Collect new names first so inverse expressions can mention them.
            for (const auto& line : section.lines) {
                auto parts = split_dots(line.key);
                if (parts[0] == "forward" && parts.size() == 2)
                    spec.new_names.push_back(parts[1]);
            }
            if (spec.new_names.size() != vars.size())
                throw ModelError("substitution '" + name + "' declares " +
                                     std::to_string(spec.new_names.size()) +
                                     " forward entries for " + std::to_string(vars.size()) +
                                     " variables",
                                 section.number);
            for (const auto& nn : spec.new_names) {
                if (table.contains(nn))
                    throw ModelError("substitution '" + name + "': new variable '" + nn +
                                         "' clashes with an existing symbol",
                                     section.number);
            }
            SymbolTable new_table = table.with_dyn_vars(spec.new_names);
            spec.forward.assign(vars.size(), zero_expr());
            for (const auto& line : section.lines) {
                if (line.key.rfind("domain ", 0) == 0) {
                    Interval iv;
                    if (!parse_range(line.value, line.number, iv))
                        throw ModelError("domain needs range(lo, hi)", line.number);
                    spec.domains.emplace_back(trim(line.key.substr(7)), iv);
                    continue;
                }
                auto parts = split_dots(line.key);
                if (parts[0] == "forward" && parts.size() == 2) {
                    auto it = std::find(spec.new_names.begin(), spec.new_names.end(), parts[1]);
                    spec.forward[static_cast<std::size_t>(it - spec.new_names.begin())] =
                        parse_expr_or_rethrow(line.value, table, line.number);
                } else if (parts[0] == "inverse" && parts.size() == 2) {
                    if (std::find(vars.begin(), vars.end(), parts[1]) == vars.end())
                        throw ModelError("inverse entries name old variables", line.number);
                    spec.inverse.emplace_back(
                        parts[1], parse_expr_or_rethrow(line.value, new_table, line.number));
                } else {
                    throw ModelError("unknown substitution entry '" + line.key + "'",
                                     line.number);
                }
            }
            out.substitutions.push_back(std::move(spec));
        } else {
            throw ModelError("unknown section [" + section.header + "]", section.number);
        }
    }
    return out;
}

ModelFile load_model_path(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ModelError("cannot open model file '" + path + "'", 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

namespace {

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // trim to the shortest representation that round-trips
    for (int prec = 1; prec <= 17; ++prec) {
        char probe[64];
        std::snprintf(probe, sizeof probe, "%.*g", prec, v);
        if (std::stod(probe) == v)
            return probe;
    }
    return buf;
}

} // namespace

std::string render_model(const SdeSystem& sys, const std::vector<VectorField>& fields,
                         const std::vector<SubstitutionSpec>& subs)
{
    std::ostringstream os;
    const auto& t = sys.symbols;
    os << "[system]\n";
    os << "vars = ";
    for (std::size_t i = 0; i < t.dyn_vars().size(); ++i)
        os << (i ? ", " : "") << t.dyn_vars()[i];
    os << "\n";
    os << "time = " << t.time_var() << "\n";
    if (!t.noise_vars().empty()) {
        os << "noises = ";
        for (std::size_t i = 0; i < t.noise_vars().size(); ++i)
            os << (i ? ", " : "") << t.noise_vars()[i];
        os << "\n";
    }
    os << "calculus = " << to_string(sys.calculus) << "\n";
    for (const auto& p : t.params()) {
        if (p.fixed)
            os << "param " << p.name << " = " << format_double(*p.fixed) << "\n";
        else
            os << "param " << p.name << " = range(" << format_double(p.range.lo) << ", "
               << format_double(p.range.hi) << ")\n";
    }
    for (std::size_t i = 0; i < t.dyn_vars().size(); ++i)
        os << "f." << t.dyn_vars()[i] << " = " << render(sys.drift[i]) << "\n";
    for (std::size_t i = 0; i < t.dyn_vars().size(); ++i)
        for (std::size_t k = 0; k < t.noise_vars().size(); ++k)
            if (!is_num(sys.noise[i][k], Rat(0)))
                os << "sigma." << t.dyn_vars()[i] << "." << t.noise_vars()[k] << " = "
                   << render(sys.noise[i][k]) << "\n";

    for (const auto& f : fields) {
        os << "\n[field " << f.name << "]\n";
        for (std::size_t i = 0; i < t.dyn_vars().size(); ++i)
            if (!is_num(f.phi[i], Rat(0)))
                os << "phi." << t.dyn_vars()[i] << " = " << render(f.phi[i]) << "\n";
        if (f.action.kind == NoiseAction::Kind::Matrix) {
            for (std::size_t k = 0; k < t.noise_vars().size(); ++k)
                for (std::size_t l = 0; l < t.noise_vars().size(); ++l)
                    if (f.action.R[k][l] != 0)
                        os << "R." << t.noise_vars()[k] << "." << t.noise_vars()[l] << " = "
                           << rat_str(f.action.R[k][l]) << "\n";
        } else {
            for (std::size_t k = 0; k < t.noise_vars().size(); ++k)
                if (!is_num(f.action.xi[k], Rat(0)))
                    os << "xi." << t.noise_vars()[k] << " = " << render(f.action.xi[k]) << "\n";
        }
    }
    for (const auto& s : subs) {
        os << "\n[substitution " << s.name << "]\n";
        for (std::size_t i = 0; i < s.new_names.size(); ++i)
            os << "forward." << s.new_names[i] << " = " << render(s.forward[i]) << "\n";
        for (const auto& [old_var, e] : s.inverse)
            os << "inverse." << old_var << " = " << render(e) << "\n";
        for (const auto& [nn, iv] : s.domains)
            os << "domain " << nn << " = range(" << format_double(iv.lo) << ", "
               << format_double(iv.hi) << ")\n";
    }
    return os.str();
}

} // namespace sdesym
