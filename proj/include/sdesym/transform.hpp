#pragma once

#include "sdesym/deteq.hpp"
#include "sdesym/model.hpp"

namespace sdesym {

// Change of dynamical variables y = Psi(x, t, w) with supplied (or derived)
// inverse x = Xi(y, t, w); time and the noise variables stay fixed.
struct Substitution {
    std::vector<std::string> new_names;
    std::vector<Expr> forward;  // Psi, in old symbols
    std::vector<Expr> inverse;  // Xi, in new symbols, indexed like the old vars
    SymbolTable old_table;
    SymbolTable new_table;

    bool is_identity() const;
    // bindings old var -> Xi used to re-express coefficients in new variables
    std::map<std::string, Expr> inverse_bindings() const;
};

struct TransformError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Validates mutual inverseness (Psi composed with Xi gives the new variables,
// checked by is_zero) and assembles the symbol table for the new variables.
Substitution make_substitution(const SdeSystem& sys, const SubstitutionSpec& spec,
                               const SampleSpec& sample);

Substitution identity_substitution(const SdeSystem& sys);

// Solves y = psi(x, ...) for x against a closed inversion table:
// affine, c*F(x)+d with F one of x^q, exp(affine), log(affine), affine^q.
std::optional<Expr> invert_monotone(const Expr& psi, const std::string& x,
                                    const std::string& y);

// Ito-calculus transform: new drift Psi_t + f^j d_j Psi + (1/2) Lap(Psi),
// new noise d^_k Psi + sigma^j_k d_j Psi, re-expressed in the new variables.
SdeSystem ito_change_of_vars(const SdeSystem& sys, const Substitution& sub);

// Stratonovich systems transform by the plain chain rule (no Laplacian term).
SdeSystem strat_change_of_vars(const SdeSystem& sys, const Substitution& sub);

SdeSystem change_of_vars(const SdeSystem& sys, const Substitution& sub);

struct KozlovResult {
    Substitution sub;
    SdeSystem system;
};

// Straightening substitution y = int dx / phi for a standard symmetry of a
// scalar equation; the transformed coefficients are free of y whenever X
// really is a symmetry.
KozlovResult kozlov(const SdeSystem& sys, const VectorField& X, const SampleSpec& spec);

struct ModifiedKozlovResult {
    Substitution sub;
    SdeSystem system;
    VectorField field; // pushforward of X, in scaling form r(y d_y + w d_w)
};

// Scaling substitution y = exp[r int dx / phi] for a split W-symmetry.
ModifiedKozlovResult modified_kozlov(const SdeSystem& sys, const VectorField& X,
                                     const SampleSpec& spec);

// Invariant of the W-symmetry flow, chi = w exp[- int r/phi dx].
Expr characteristic_chi(const VectorField& X);

struct StraighteningReport {
    bool psi_pass = false;   // X(psi) = 1
    bool theta_pass = false; // X(theta) = 0
    bool zeta_pass = false;  // X(zeta) = 0
    bool admissible = true;  // zeta must actually depend on the variables
    Expr psi_residual, theta_residual, zeta_residual;
};

StraighteningReport straightening_check(const VectorField& X, const Expr& psi,
                                        const Expr& theta, const Expr& zeta,
                                        const SampleSpec& spec);

// Chain-rule pushforward: new components X(Psi^i) re-expressed in the new
// variables; the noise action is untouched since (t, w) stay fixed.
VectorField pushforward_field(const VectorField& X, const Substitution& sub);

// Transforms the system and the field together and re-runs the symmetry check.
SymmetryReport post_transform_check(const SdeSystem& sys, const VectorField& X,
                                    const Substitution& sub, const SampleSpec& spec);

} // namespace sdesym
