#include "identiscope/modular.hpp"

#include <utility>

#include "identiscope/errors.hpp"

namespace identiscope {

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  mpz_class z;
  mpz_import(z.get_mpz_t(), 1, 1, sizeof(n), 0, 0, &n);
  // For 64-bit inputs GMP's BPSW test is exact.
  return mpz_probab_prime_p(z.get_mpz_t(), 30) != 0;
}

PrimeField::PrimeField(std::uint64_t p) : p_(p) {
  if (p < 2 || p >= (std::uint64_t{1} << 32) || !is_prime(p)) {
    throw Error(ErrorCode::InvalidArgument,
                "modulus " + std::to_string(p) + " is not a prime below 2^32");
  }
}

Residue PrimeField::inv(Residue a) const {
  if (a % p_ == 0) throw Error(ErrorCode::DivisionByZeroModP, "inverse of zero mod p");
  // Extended Euclid on signed 64-bit values; both operands are < 2^32.
  long long t = 0, new_t = 1;
  long long r = static_cast<long long>(p_), new_r = static_cast<long long>(a % p_);
  while (new_r != 0) {
    long long q = r / new_r;
    t = std::exchange(new_t, t - q * new_t);
    r = std::exchange(new_r, r - q * new_r);
  }
  if (t < 0) t += static_cast<long long>(p_);
  return static_cast<Residue>(t);
}

Residue PrimeField::pow(Residue a, long exponent) const {
  if (exponent < 0) {
    a = inv(a);
    exponent = -exponent;
  }
  Residue result = 1 % p_;
  Residue base = a % p_;
  auto e = static_cast<unsigned long>(exponent);
  while (e != 0) {
    if (e & 1U) result = mul(result, base);
    base = mul(base, base);
    e >>= 1U;
  }
  return result;
}

Residue PrimeField::from_int(long long v) const noexcept {
  long long m = v % static_cast<long long>(p_);
  if (m < 0) m += static_cast<long long>(p_);
  return static_cast<Residue>(m);
}

Residue PrimeField::from_rational(const Rational& q) const {
  const Residue num = mpz_fdiv_ui(q.get_num_mpz_t(), p_);
  const Residue den = mpz_fdiv_ui(q.get_den_mpz_t(), p_);
  if (den == 0) {
    throw Error(ErrorCode::DivisionByZeroModP,
                "denominator of constant " + q.get_str() + " vanishes mod " + std::to_string(p_));
  }
  return mul(num, inv(den));
}

void ModMatrix::append_row(std::span<const Residue> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw Error(ErrorCode::InvalidArgument, "row length does not match matrix width");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

ModMatrix ModMatrix::without_column(std::size_t c) const {
  ModMatrix out(rows_, cols_ - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (j != c) out.at(r, k++) = at(r, j);
    }
  }
  return out;
}

ModMatrix row_echelon(ModMatrix m, const PrimeField& field) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t pivot = r;
    while (pivot < rows && m.at(pivot, c) == 0) ++pivot;
    if (pivot == rows) continue;
    if (pivot != r) {
      for (std::size_t j = c; j < cols; ++j) std::swap(m.at(pivot, j), m.at(r, j));
    }
    const Residue scale = field.inv(m.at(r, c));
    for (std::size_t j = c; j < cols; ++j) m.at(r, j) = field.mul(m.at(r, j), scale);
    for (std::size_t i = r + 1; i < rows; ++i) {
      const Residue f = m.at(i, c);
      if (f == 0) continue;
      for (std::size_t j = c; j < cols; ++j) {
        m.at(i, j) = field.sub(m.at(i, j), field.mul(f, m.at(r, j)));
      }
    }
    ++r;
  }
  ModMatrix out(0, cols);
  for (std::size_t i = 0; i < r; ++i) out.append_row(m.row(i));
  return out;
}

std::size_t rank(ModMatrix m, const PrimeField& field) { return row_echelon(std::move(m), field).rows(); }

namespace {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31U);
}

}  // namespace

Residue keyed_residue(std::span<const std::uint64_t> key, std::uint64_t p) {
  std::uint64_t state = 0x6a09e667f3bcc908ULL;
  for (auto k : key) {
    state ^= k;
    state = splitmix64(state);
  }
  // Rejection sampling keeps the draw exactly uniform on [1, p-1].
  const std::uint64_t range = p - 1;
  const std::uint64_t max = ~std::uint64_t{0};
  const std::uint64_t limit = max - max % range;
  std::uint64_t x = splitmix64(state);
  while (x >= limit) x = splitmix64(state);
  return 1 + x % range;
}

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace identiscope
