#pragma once

#include "sdesym/model.hpp"

namespace sdesym {

// Left-minus-right sides of the symmetry determining equations for a system
// and a candidate generator. A field is a symmetry iff every entry vanishes.
struct ResidualSet {
    std::vector<Expr> drift;              // one per dynamical variable
    std::vector<std::vector<Expr>> noise; // dyn x noise
    Calculus calculus = Calculus::Ito;
    bool scalar_form = false;
};

// Second-order operator of Ito's formula for the system's noise matrix:
//   sum_{i,j} [ delta_ij d2/dw^i dw^j + 2 sigma^i_j d2/dx^i dw^j
//               + sum_k sigma^i_k sigma^j_k d2/dx^i dx^j ]
Expr ito_laplacian(const Expr& e, const SdeSystem& sys);

// Dispatches to the scalar builder for one-dimensional systems (which also
// accepts general noise actions) and to the n-dimensional builder otherwise.
ResidualSet build_residuals(const SdeSystem& sys, const VectorField& X);
ResidualSet build_residuals_scalar(const SdeSystem& sys, const VectorField& X);
ResidualSet build_residuals_ndim(const SdeSystem& sys, const VectorField& X);

struct ResidualStatus {
    std::string label; // e.g. "drift[x]", "noise[x][w]"
    Expr residual;
    bool pass = false;
    std::optional<Witness> witness;
};

struct SymmetryReport {
    bool symmetry = false;
    SymmetryClass cls = SymmetryClass::DeterministicStandard;
    std::vector<ResidualStatus> entries;

    const ResidualStatus* first_failure() const
    {
        for (const auto& e : entries)
            if (!e.pass)
                return &e;
        return nullptr;
    }
};

SymmetryReport check_symmetry(const SdeSystem& sys, const VectorField& X,
                              const SampleSpec& spec);

// Collocation search: phi^i = sum_a c_ia B_ia with the noise action fixed.
// The determining equations are affine in the coefficients, so sampling them
// at random points yields a linear system whose (numerical) nullspace spans
// the candidate symmetries. Every returned field passes check_symmetry.
std::vector<VectorField> find_symmetries_ansatz(
    const SdeSystem& sys, const std::vector<std::vector<Expr>>& basis,
    const std::vector<std::vector<Rat>>& R, const SampleSpec& spec);

} // namespace sdesym
