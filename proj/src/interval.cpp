#include "bsynth/interval.hpp"

#include <algorithm>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace bsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Lower/upper bounds that need no widening (exact by construction).
Interval exact(double lo, double hi) {
    return Interval(lo, hi);
}

Interval widened(double lo, double hi) {
    return Interval(round_down(lo), round_up(hi));
}

// True if some point offset + k*period (k integer) may lie in [lo, hi].
// Errs towards true near the endpoints.
bool may_contain_periodic(double lo, double hi, double offset, double period) {
    const double slack = 1e-13 * (1.0 + std::max(std::fabs(lo), std::fabs(hi)));
    const double k = std::ceil((lo - slack - offset) / period);
    return offset + k * period <= hi + slack;
}

}  // namespace

Interval::Interval(double lower, double upper) : lo_(lower), hi_(upper) {
    if (!(lower <= upper)) {
        throw std::invalid_argument("interval with lower bound above upper bound");
    }
}

Interval Interval::entire() {
    return Interval(-kInf, kInf);
}

double round_down(double x) {
    for (int i = 0; i < Interval::kWidenUlps; ++i) x = std::nextafter(x, -kInf);
    return x;
}

double round_up(double x) {
    for (int i = 0; i < Interval::kWidenUlps; ++i) x = std::nextafter(x, kInf);
    return x;
}

Interval hull(const Interval& a, const Interval& b) {
    return exact(std::min(a.lower(), b.lower()), std::max(a.upper(), b.upper()));
}

Interval operator-(const Interval& a) {
    return exact(-a.upper(), -a.lower());
}

Interval operator+(const Interval& a, const Interval& b) {
    return widened(a.lower() + b.lower(), a.upper() + b.upper());
}

Interval operator-(const Interval& a, const Interval& b) {
    return widened(a.lower() - b.upper(), a.upper() - b.lower());
}

Interval operator*(const Interval& a, const Interval& b) {
    const double p1 = a.lower() * b.lower();
    const double p2 = a.lower() * b.upper();
    const double p3 = a.upper() * b.lower();
    const double p4 = a.upper() * b.upper();
    // 0 * inf yields NaN; treat such products as unbounded.
    if (std::isnan(p1) || std::isnan(p2) || std::isnan(p3) || std::isnan(p4)) {
        return Interval::entire();
    }
    return widened(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

Interval operator/(const Interval& a, const Interval& b) {
    if (b.contains(0.0)) throw std::domain_error("interval division by a range containing zero");
    const double q1 = a.lower() / b.lower();
    const double q2 = a.lower() / b.upper();
    const double q3 = a.upper() / b.lower();
    const double q4 = a.upper() / b.upper();
    if (std::isnan(q1) || std::isnan(q2) || std::isnan(q3) || std::isnan(q4)) {
        return Interval::entire();
    }
    return widened(std::min({q1, q2, q3, q4}), std::max({q1, q2, q3, q4}));
}

Interval pow(const Interval& a, int exponent) {
    if (exponent < 0) throw std::domain_error("negative integer exponent");
    if (exponent == 0) return Interval(1.0);
    if (exponent == 1) return a;
    const double pl = std::pow(a.lower(), exponent);
    const double pu = std::pow(a.upper(), exponent);
    if (exponent % 2 == 1) return widened(pl, pu);
    if (a.lower() >= 0.0) return Interval(std::max(0.0, round_down(pl)), round_up(pu));
    if (a.upper() <= 0.0) return Interval(std::max(0.0, round_down(pu)), round_up(pl));
    return Interval(0.0, round_up(std::max(pl, pu)));
}

Interval sin(const Interval& a) {
    if (!std::isfinite(a.lower()) || !std::isfinite(a.upper()) || a.width() >= kTwoPi) {
        return Interval(-1.0, 1.0);
    }
    const double sl = std::sin(a.lower());
    const double su = std::sin(a.upper());
    double lo = round_down(std::min(sl, su));
    double hi = round_up(std::max(sl, su));
    if (may_contain_periodic(a.lower(), a.upper(), std::numbers::pi / 2, kTwoPi)) hi = 1.0;
    if (may_contain_periodic(a.lower(), a.upper(), -std::numbers::pi / 2, kTwoPi)) lo = -1.0;
    return Interval(std::max(-1.0, lo), std::min(1.0, hi));
}

Interval cos(const Interval& a) {
    if (!std::isfinite(a.lower()) || !std::isfinite(a.upper()) || a.width() >= kTwoPi) {
        return Interval(-1.0, 1.0);
    }
    const double cl = std::cos(a.lower());
    const double cu = std::cos(a.upper());
    double lo = round_down(std::min(cl, cu));
    double hi = round_up(std::max(cl, cu));
    if (may_contain_periodic(a.lower(), a.upper(), 0.0, kTwoPi)) hi = 1.0;
    if (may_contain_periodic(a.lower(), a.upper(), std::numbers::pi, kTwoPi)) lo = -1.0;
    return Interval(std::max(-1.0, lo), std::min(1.0, hi));
}

Interval exp(const Interval& a) {
    return Interval(std::max(0.0, round_down(std::exp(a.lower()))), round_up(std::exp(a.upper())));
}

Interval log(const Interval& a) {
    if (!(a.lower() > 0.0)) throw std::domain_error("interval logarithm of a non-positive range");
    return widened(std::log(a.lower()), std::log(a.upper()));
}

Interval sqrt(const Interval& a) {
    if (!(a.lower() >= 0.0)) throw std::domain_error("interval square root of a negative range");
    return Interval(std::max(0.0, round_down(std::sqrt(a.lower()))), round_up(std::sqrt(a.upper())));
}

std::ostream& operator<<(std::ostream& os, const Interval& a) {
    return os << '[' << a.lower() << ", " << a.upper() << ']';
}

}  // namespace bsynth
