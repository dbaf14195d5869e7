#include "oatk/numeric.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace oatk {

double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::invalid_argument("digamma: domain is x > 0");
    }
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_2k / (2k x^2k), truncated past x^-12
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 -
                      inv2 * (1.0 / 120.0 -
                              inv2 * (1.0 / 252.0 -
                                      inv2 * (1.0 / 240.0 -
                                              inv2 * (1.0 / 132.0 -
                                                      inv2 * (691.0 / 32760.0))))));
    return result;
}

std::string Ratio::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

Ratio Ratio::parse(const std::string& text) {
    if (text.empty()) {
        throw std::invalid_argument("empty numeric literal");
    }
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        std::size_t used_n = 0, used_d = 0;
        const std::string ns = text.substr(0, slash);
        const std::string ds = text.substr(slash + 1);
        long long n = 0, d = 0;
        try {
            n = std::stoll(ns, &used_n);
            d = std::stoll(ds, &used_d);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad fraction literal '" + text + "'");
        }
        if (used_n != ns.size() || used_d != ds.size() || d <= 0) {
            throw std::invalid_argument("bad fraction literal '" + text + "'");
        }
        const long long g = std::gcd(n < 0 ? -n : n, d);
        return Ratio{g ? n / g : n, g ? d / g : d};
    }
    // decimal: keep an exact power-of-ten denominator when it fits
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad numeric literal '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) {
        throw std::invalid_argument("bad numeric literal '" + text + "'");
    }
    const auto dot = text.find('.');
    if (dot != std::string::npos && text.find_first_of("eE") == std::string::npos &&
        text.size() - dot - 1 <= 9) {
        long long den = 1;
        for (std::size_t i = 0; i < text.size() - dot - 1; ++i) den *= 10;
        const double scaled = v * static_cast<double>(den);
        const long long num = std::llround(scaled);
        if (std::abs(scaled - static_cast<double>(num)) < 1e-9) {
            const long long g = std::gcd(num < 0 ? -num : num, den);
            return Ratio{g ? num / g : num, g ? den / g : den};
        }
    }
    if (dot == std::string::npos && text.find_first_of("eE") == std::string::npos) {
        return Ratio{std::llround(v), 1};
    }
    // falls back to a denominator large enough to round-trip doubles closely
    const long long den = 1LL << 40;
    return Ratio{std::llround(v * static_cast<double>(den)), den};
}

}  // namespace oatk
