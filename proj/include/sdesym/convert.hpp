#pragma once

#include "sdesym/model.hpp"
#include "sdesym/transform.hpp"

namespace sdesym {

// Drift correction relating the Ito and Stratonovich forms; the noise matrix
// is shared. Component i of the shift is
//   (1/2) sum_k [ sum_j d_j sigma^i_k * sigma^j_k + d^_k sigma^i_k ].
std::vector<Expr> stratonovich_shift(const SdeSystem& sys);

SdeSystem to_stratonovich(const SdeSystem& sys);
SdeSystem to_ito(const SdeSystem& sys);

// For a scalar system and a W-action (r): r (sigma_w + sigma sigma_x).
// Vanishing decides whether the Ito and Stratonovich symmetry verdicts agree.
Expr persistence_condition(const SdeSystem& sys, const VectorField& X);

struct NormalizeNoiseResult {
    Substitution sub;
    SdeSystem system; // unit noise coefficient
};

// xi = int dx / sigma turns a scalar proper Ito equation into one with unit
// noise. Rejected for generalized equations, where no such substitution exists.
NormalizeNoiseResult normalize_noise(const SdeSystem& sys, const SampleSpec& spec);

// Finite group element acting simultaneously on the dynamical variables and
// the noises: a dilation with per-variable exponents, or a simultaneous
// rotation of a variable block and a noise block.
struct GroupElement {
    enum class Kind { Dilation, Rotation };
    Kind kind = Kind::Dilation;

    // dilation: x^i -> lambda^{e_i} x^i, w^k -> lambda^{d_k} w^k
    Expr lambda;
    std::vector<Rat> var_exponents;
    std::vector<Rat> noise_exponents;

    // rotation: simultaneous orthogonal action on the named blocks
    std::vector<std::string> var_block;
    std::vector<std::string> noise_block;
    std::vector<std::vector<Expr>> matrix;

    static GroupElement dilation(Expr lambda, std::vector<Rat> var_exps,
                                 std::vector<Rat> noise_exps);
    static GroupElement rotation(std::vector<std::vector<Expr>> matrix,
                                 std::vector<std::string> var_block,
                                 std::vector<std::string> noise_block);
};

// Substitutes the finite transformation into the equation, normalizes the dx
// term and discharges the transformed noise differential onto sigma, returning
// the system in the original variable names. A symmetry-generated element
// leaves the system invariant under this map.
SdeSystem apply_group_element(const SdeSystem& sys, const GroupElement& g,
                              const SampleSpec& spec = SampleSpec{});

} // namespace sdesym
