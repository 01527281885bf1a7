#ifndef CUBICON_BIGINT_HPP
#define CUBICON_BIGINT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace cubicon {

// Sign-magnitude arbitrary-precision integer.  Only the operations needed
// by the Smith normal form reduction are provided; division truncates
// toward zero (C semantics).
class BigInt {
public:
    BigInt() = default;
    BigInt(long long v);

    bool is_zero() const { return mag_.empty(); }
    int sign() const { return sign_; }
    BigInt abs() const;

    BigInt operator-() const;
    BigInt operator+(const BigInt& o) const;
    BigInt operator-(const BigInt& o) const;
    BigInt operator*(const BigInt& o) const;
    BigInt operator/(const BigInt& o) const; // truncated quotient
    BigInt operator%(const BigInt& o) const; // sign follows dividend
    BigInt& operator+=(const BigInt& o) { return *this = *this + o; }
    BigInt& operator-=(const BigInt& o) { return *this = *this - o; }
    BigInt& operator*=(const BigInt& o) { return *this = *this * o; }

    bool operator==(const BigInt& o) const { return sign_ == o.sign_ && mag_ == o.mag_; }
    bool operator!=(const BigInt& o) const { return !(*this == o); }
    bool operator<(const BigInt& o) const;

    // |a| < |b|
    static bool abs_less(const BigInt& a, const BigInt& b) { return cmp_mag(a.mag_, b.mag_) < 0; }

    bool fits_int64() const;
    long long to_int64() const; // throws Error if out of range
    std::string to_string() const;

    static BigInt gcd(BigInt a, BigInt b);

private:
    static int cmp_mag(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b);
    static std::vector<std::uint32_t> add_mag(const std::vector<std::uint32_t>& a,
                                              const std::vector<std::uint32_t>& b);
    static std::vector<std::uint32_t> sub_mag(const std::vector<std::uint32_t>& a,
                                              const std::vector<std::uint32_t>& b);
    static void divmod_mag(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b,
                           std::vector<std::uint32_t>& q, std::vector<std::uint32_t>& r);
    void trim();

    int sign_ = 0;                    // -1, 0, +1
    std::vector<std::uint32_t> mag_;  // little-endian limbs, no leading zeros
};

} // namespace cubicon

#endif
