#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdesym {

// Exact rational arithmetic for the constants inside expression trees.
// Doubles appear only at evaluation time.
using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rat rat(long long num, long long den = 1)
{
    if (den == 0)
        throw std::invalid_argument("rational with zero denominator");
    return Rat(BigInt(num), BigInt(den));
}

inline bool is_integer(const Rat& r)
{
    return boost::multiprecision::denominator(r) == 1;
}

inline BigInt rat_num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline BigInt rat_den(const Rat& r) { return boost::multiprecision::denominator(r); }

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

// r^n for integer n (n may be negative when r != 0).
inline Rat rat_pow(const Rat& r, const BigInt& n)
{
    if (n == 0)
        return Rat(1);
    BigInt an = n < 0 ? BigInt(-n) : n;
    if (an > 1024)
        throw std::overflow_error("rational exponent too large to fold");
    Rat acc(1);
    for (BigInt i = 0; i < an; ++i)
        acc *= r;
    if (n < 0) {
        if (acc == 0)
            throw std::domain_error("zero to a negative power");
        acc = Rat(1) / acc;
    }
    return acc;
}

// Exact k-th root of a nonnegative integer, if it exists.
inline bool exact_root(const BigInt& value, unsigned k, BigInt& out)
{
    if (value < 0)
        return false;
    if (value == 0 || value == 1) {
        out = value;
        return true;
    }
    BigInt lo = 1, hi = value;
    while (lo <= hi) {
        BigInt mid = (lo + hi) / 2;
        BigInt p = 1;
        bool over = false;
        for (unsigned i = 0; i < k; ++i) {
            p *= mid;
            if (p > value) {
                over = true;
                break;
            }
        }
        if (!over && p == value) {
            out = mid;
            return true;
        }
        if (over || p > value)
            hi = mid - 1;
        else
            lo = mid + 1;
    }
    return false;
}

inline std::string rat_str(const Rat& r)
{
    if (is_integer(r))
        return rat_num(r).str();
    return rat_num(r).str() + "/" + rat_den(r).str();
}

} // namespace sdesym
