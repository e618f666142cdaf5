#pragma once

#include "sdesym/expr.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sdesym {

enum class Calculus { Ito, Stratonovich };

const char* to_string(Calculus c);

// An Ito or Stratonovich system dx^i = f^i dt + sigma^i_k dw^k. Coefficients
// may read the driving noises themselves (a "generalized" equation).
struct SdeSystem {
    SymbolTable symbols;
    Calculus calculus = Calculus::Ito;
    std::vector<Expr> drift;               // one per dynamical variable
    std::vector<std::vector<Expr>> noise;  // rows: dynamical vars, cols: noises

    void validate() const;
    // True when no drift or noise entry mentions a noise variable.
    bool proper() const;
    SdeSystem simplified() const;
};

// Action of a generator on the noise variables: either a constant rational
// matrix R (w-components R^k_l w^l) or general expressions xi^k(x,t,w).
struct NoiseAction {
    enum class Kind { Matrix, General };
    Kind kind = Kind::Matrix;
    std::vector<std::vector<Rat>> R; // square, noise x noise
    std::vector<Expr> xi;            // one per noise variable

    static NoiseAction zero(std::size_t n_noise);
    static NoiseAction matrix(std::vector<std::vector<Rat>> entries);
    static NoiseAction general(std::vector<Expr> xi);

    bool is_zero() const;
    // w-components as expressions, in either representation.
    std::vector<Expr> components(const SymbolTable& symbols) const;
};

// Symmetry generator X = phi^i d/dx^i + xi^k d/dw^k; never acts on time.
struct VectorField {
    std::string name;
    SymbolTable symbols;
    std::vector<Expr> phi;
    NoiseAction action;

    void validate() const;
    // Applies X as a derivation to an expression.
    Expr apply(const Expr& e) const;
    VectorField simplified() const;
};

enum class SymmetryClass { DeterministicStandard, RandomStandard, SplitW, GeneralW };

const char* to_string(SymmetryClass c);

SymmetryClass classify(const VectorField& X);

// Commutator [X, Y] on (x, w)-space. Noise components are demoted back to
// matrix form when they are exactly linear in the noises with rational
// constant coefficients.
VectorField lie_bracket(const VectorField& X, const VectorField& Y);

// Raw change-of-variables block from a model file; validation and use live in
// the transform layer.
struct SubstitutionSpec {
    std::string name;
    std::vector<std::string> new_names;          // declaration order
    std::vector<Expr> forward;                   // new = Psi(old, t, w)
    std::vector<std::pair<std::string, Expr>> inverse; // old var -> Xi(new, t, w)
    std::vector<std::pair<std::string, Interval>> domains; // for new variables
};

struct ModelFile {
    SdeSystem system;
    std::vector<VectorField> fields;
    std::vector<SubstitutionSpec> substitutions;
    std::vector<std::string> warnings;

    const VectorField* find_field(const std::string& name) const;
    const SubstitutionSpec* find_substitution(const std::string& name) const;
};

struct ModelError : std::runtime_error {
    ModelError(const std::string& msg, int line_)
        : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg : msg),
          line(line_)
    {
    }
    int line;
};

ModelFile load_model(const std::string& text);
ModelFile load_model_path(const std::string& path);

std::string render_model(const SdeSystem& sys, const std::vector<VectorField>& fields = {},
                         const std::vector<SubstitutionSpec>& subs = {});

} // namespace sdesym
