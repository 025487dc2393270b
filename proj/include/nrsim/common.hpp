#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nrsim {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;

/// Raised for invalid user-facing configuration (bad key, out-of-range value).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) {
        throw std::invalid_argument(what);
    }
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Smallest b such that 2^b >= n (n >= 1).
inline int ceil_log2(unsigned long long n)
{
    require(n >= 1, "ceil_log2: argument must be >= 1");
    int bits = 0;
    unsigned long long v = 1;
    while (v < n) {
        v <<= 1;
        ++bits;
    }
    return bits;
}

inline unsigned long long binomial(int n, int k)
{
    require(n >= 0 && k >= 0 && k <= n, "binomial: need 0 <= k <= n");
    k = std::min(k, n - k);
    unsigned long long r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned long long>(n - k + i) / static_cast<unsigned long long>(i);
    }
    return r;
}

inline bool all_finite(const CMatrix& m)
{
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const cdouble z = m.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            return false;
        }
    }
    return true;
}

} // namespace nrsim
