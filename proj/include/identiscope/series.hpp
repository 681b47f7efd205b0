#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "identiscope/modular.hpp"

namespace identiscope {

/// Power series over F_p truncated after t^order.
class TruncSeries {
 public:
  TruncSeries(std::size_t order, const PrimeField& field) : field_(field), c_(order + 1, 0) {}
  TruncSeries(std::vector<Residue> coeffs, const PrimeField& field);

  static TruncSeries constant(std::size_t order, Residue value, const PrimeField& field);

  std::size_t order() const noexcept { return c_.size() - 1; }
  const PrimeField& field() const noexcept { return field_; }
  Residue operator[](std::size_t k) const { return c_[k]; }
  Residue& operator[](std::size_t k) { return c_[k]; }
  std::span<const Residue> coefficients() const noexcept { return c_; }

  /// Same series cut (or zero-padded) to a new order.
  TruncSeries truncated(std::size_t order) const;

  TruncSeries& operator+=(const TruncSeries& o);
  TruncSeries& operator-=(const TruncSeries& o);
  TruncSeries operator-() const;
  TruncSeries scaled(Residue s) const;

  /// Requires a unit constant term; throws DivisionByZeroModP otherwise.
  TruncSeries inverse() const;
  /// Integer powers; negative exponents go through inverse().
  TruncSeries pow(long long n) const;

  /// d/dt; the result has one order less (order 0 stays order 0 with value 0).
  TruncSeries derivative() const;
  /// c + ∫_0^t; the result has one order more.
  TruncSeries integral(Residue c) const;

  bool operator==(const TruncSeries& o) const { return c_ == o.c_ && field_ == o.field_; }

 private:
  PrimeField field_;
  std::vector<Residue> c_;
};

TruncSeries operator+(TruncSeries a, const TruncSeries& b);
TruncSeries operator-(TruncSeries a, const TruncSeries& b);
/// Cauchy product truncated at min(a.order, b.order).
TruncSeries operator*(const TruncSeries& a, const TruncSeries& b);

}  // namespace identiscope
