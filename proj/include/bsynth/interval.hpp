#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>

namespace bsynth {

/// Closed real interval [lower, upper] with outward-rounded arithmetic.
///
/// Every primitive below widens both bounds by four units in the last place
/// after computing them in round-to-nearest, so the result encloses the exact
/// mathematical range regardless of the platform rounding mode.
class Interval {
public:
    static constexpr int kWidenUlps = 4;

    constexpr Interval() = default;
    constexpr explicit Interval(double point) : lo_(point), hi_(point) {}
    Interval(double lower, double upper);

    static Interval entire();

    double lower() const { return lo_; }
    double upper() const { return hi_; }
    double width() const { return hi_ - lo_; }
    double mid() const { return lo_ + 0.5 * (hi_ - lo_); }
    double mag() const { return std::max(std::fabs(lo_), std::fabs(hi_)); }

    bool contains(double x) const { return lo_ <= x && x <= hi_; }
    bool contains(const Interval& other) const {
        return lo_ <= other.lo_ && other.hi_ <= hi_;
    }
    bool intersects(const Interval& other) const {
        return lo_ <= other.hi_ && other.lo_ <= hi_;
    }
    bool is_point() const { return lo_ == hi_; }

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double lo_ = 0.0;
    double hi_ = 0.0;
};

/// Moves x down (up) by the configured number of ulps.
double round_down(double x);
double round_up(double x);

Interval hull(const Interval& a, const Interval& b);

Interval operator-(const Interval& a);
Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator*(const Interval& a, const Interval& b);
/// Requires 0 not in b; callers check definedness first.
Interval operator/(const Interval& a, const Interval& b);

/// Integer power with the even-power rule, so pow([-2,1], 2) = [0, 4].
Interval pow(const Interval& a, int exponent);
Interval sin(const Interval& a);
Interval cos(const Interval& a);
Interval exp(const Interval& a);
/// Requires a.lower() > 0.
Interval log(const Interval& a);
/// Requires a.lower() >= 0.
Interval sqrt(const Interval& a);

std::ostream& operator<<(std::ostream& os, const Interval& a);

}  // namespace bsynth
