#include "identiscope/series.hpp"

#include <algorithm>

#include "identiscope/errors.hpp"

namespace identiscope {

TruncSeries::TruncSeries(std::vector<Residue> coeffs, const PrimeField& field)
    : field_(field), c_(std::move(coeffs)) {
  if (c_.empty()) c_.push_back(0);
}

TruncSeries TruncSeries::constant(std::size_t order, Residue value, const PrimeField& field) {
  TruncSeries s(order, field);
  s.c_[0] = value;
  return s;
}

TruncSeries TruncSeries::truncated(std::size_t order) const {
  TruncSeries s(order, field_);
  std::copy_n(c_.begin(), std::min(c_.size(), order + 1), s.c_.begin());
  return s;
}

TruncSeries& TruncSeries::operator+=(const TruncSeries& o) {
  const std::size_t n = std::min(c_.size(), o.c_.size());
  c_.resize(n);
  for (std::size_t k = 0; k < n; ++k) c_[k] = field_.add(c_[k], o.c_[k]);
  return *this;
}

TruncSeries& TruncSeries::operator-=(const TruncSeries& o) {
  const std::size_t n = std::min(c_.size(), o.c_.size());
  c_.resize(n);
  for (std::size_t k = 0; k < n; ++k) c_[k] = field_.sub(c_[k], o.c_[k]);
  return *this;
}

TruncSeries TruncSeries::operator-() const {
  TruncSeries s(*this);
  for (auto& v : s.c_) v = field_.neg(v);
  return s;
}

TruncSeries TruncSeries::scaled(Residue f) const {
  TruncSeries s(*this);
  for (auto& v : s.c_) v = field_.mul(v, f);
  return s;
}

TruncSeries TruncSeries::inverse() const {
  const Residue a0inv = field_.inv(c_[0]);
  TruncSeries b(order(), field_);
  b.c_[0] = a0inv;
  for (std::size_t k = 1; k < c_.size(); ++k) {
    Residue acc = 0;
    for (std::size_t i = 1; i <= k; ++i) acc = field_.add(acc, field_.mul(c_[i], b.c_[k - i]));
    b.c_[k] = field_.neg(field_.mul(a0inv, acc));
  }
  return b;
}

TruncSeries TruncSeries::pow(long long n) const {
  if (n < 0) return inverse().pow(-n);
  TruncSeries result = constant(order(), 1, field_);
  TruncSeries base = *this;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

TruncSeries TruncSeries::derivative() const {
  if (c_.size() == 1) return TruncSeries(0, field_);
  TruncSeries d(order() - 1, field_);
  for (std::size_t k = 1; k < c_.size(); ++k) {
    d.c_[k - 1] = field_.mul(c_[k], field_.from_int(static_cast<long long>(k)));
  }
  return d;
}

TruncSeries TruncSeries::integral(Residue c) const {
  TruncSeries s(order() + 1, field_);
  s.c_[0] = c;
  for (std::size_t k = 0; k < c_.size(); ++k) {
    s.c_[k + 1] = field_.div(c_[k], field_.from_int(static_cast<long long>(k + 1)));
  }
  return s;
}

TruncSeries operator+(TruncSeries a, const TruncSeries& b) { return a += b; }
TruncSeries operator-(TruncSeries a, const TruncSeries& b) { return a -= b; }

TruncSeries operator*(const TruncSeries& a, const TruncSeries& b) {
  const PrimeField& f = a.field();
  const std::size_t n = std::min(a.order(), b.order());
  TruncSeries c(n, f);
  for (std::size_t i = 0; i <= n; ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; i + j <= n; ++j) c[i + j] = f.add(c[i + j], f.mul(a[i], b[j]));
  }
  return c;
}

}  // namespace identiscope
