#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <gmpxx.h>

namespace identiscope {

using Rational = mpq_class;

/// Residues are stored canonically in [0, p).
using Residue = std::uint64_t;

bool is_prime(std::uint64_t n);

/// Arithmetic in Z/pZ for primes p < 2^32 (products fit in 64 bits).
class PrimeField {
 public:
  explicit PrimeField(std::uint64_t p);

  std::uint64_t modulus() const noexcept { return p_; }

  Residue add(Residue a, Residue b) const noexcept {
    Residue s = a + b;
    return s >= p_ ? s - p_ : s;
  }
  Residue sub(Residue a, Residue b) const noexcept {
    return a >= b ? a - b : a + p_ - b;
  }
  Residue neg(Residue a) const noexcept { return a == 0 ? 0 : p_ - a; }
  Residue mul(Residue a, Residue b) const noexcept { return (a * b) % p_; }

  /// Throws Error(DivisionByZeroModP) for a == 0.
  Residue inv(Residue a) const;
  Residue div(Residue a, Residue b) const { return mul(a, inv(b)); }
  /// Negative exponents invert first.
  Residue pow(Residue a, long exponent) const;

  Residue from_int(long long v) const noexcept;
  /// Throws Error(DivisionByZeroModP) when the denominator vanishes mod p.
  Residue from_rational(const Rational& q) const;

  bool operator==(const PrimeField&) const = default;

 private:
  std::uint64_t p_;
};

/// Dense row-major matrix over a prime field.
class ModMatrix {
 public:
  ModMatrix() = default;
  ModMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  Residue& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Residue at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const Residue> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void append_row(std::span<const Residue> values);
  ModMatrix without_column(std::size_t c) const;

  bool operator==(const ModMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Residue> data_;
};

/// Nonzero rows of a row echelon form: a basis of the row space. Deleting a
/// column commutes with passing to this basis as far as rank is concerned.
ModMatrix row_echelon(ModMatrix m, const PrimeField& field);

/// Rank by Gaussian elimination over the field.
std::size_t rank(ModMatrix m, const PrimeField& field);

/// Deterministic uniform draw from [1, p-1] keyed on a tuple of integers.
/// Every distinct key yields an independent-looking value; identical keys
/// always give identical values.
Residue keyed_residue(std::span<const std::uint64_t> key, std::uint64_t p);

std::uint64_t fnv1a(std::string_view text) noexcept;

}  // namespace identiscope
