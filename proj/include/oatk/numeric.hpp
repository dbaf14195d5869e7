#ifndef OATK_NUMERIC_HPP
#define OATK_NUMERIC_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace oatk {

/// Digamma psi(x) for x > 0. Recurrence below 6, asymptotic series above.
/// Absolute error < 1e-10 over the range the Beta updates touch.
double digamma(double x);

/// sign with sign(0) = 0.
inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// A budget expressed either as a plain decimal or an exact fraction such as
/// "4/255". The textual form is preserved so resolved configs echo the value
/// the way it was given.
struct Ratio {
    long long num = 0;
    long long den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;

    /// Accepts "a/b" with integer a, b (b > 0) or a decimal literal.
    /// Decimals are stored over a power-of-ten denominator when exact.
    static Ratio parse(const std::string& text);
};

}  // namespace oatk

#endif
