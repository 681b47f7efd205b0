#include <algorithm>
#include <random>

#include "doctest.h"
#include "identiscope/bench.hpp"
#include "identiscope/errors.hpp"
#include "identiscope/eval.hpp"
#include "identiscope/ffprob.hpp"
#include "identiscope/lie_orc.hpp"
#include "identiscope/model.hpp"
#include "identiscope/series.hpp"
#include "support.hpp"

using namespace identiscope;

namespace {

constexpr std::uint64_t kP = 2147483647;

ModelDef toy(const std::string& stem) {
  return load_model((testsupport::data_dir() / (stem + ".idm")).string());
}

// Schoolbook product truncated at `order` over the integers, reduced at the end.
std::vector<Residue> naive_product(std::span<const Residue> a, std::span<const Residue> b, std::size_t order,
                                   std::uint64_t p) {
  std::vector<Residue> out(order + 1, 0);
  for (std::size_t i = 0; i <= order; ++i) {
    mpz_class acc = 0;
    for (std::size_t j = 0; j <= i; ++j) acc += mpz_class(std::to_string(a[j])) * mpz_class(std::to_string(b[i - j]));
    acc %= static_cast<unsigned long>(p);
    out[i] = acc.get_ui();
  }
  return out;
}

TruncSeries random_series(std::mt19937_64& rng, std::size_t order, const PrimeField& f, bool unit) {
  TruncSeries s(order, f);
  for (std::size_t k = 0; k <= order; ++k) s[k] = rng() % f.modulus();
  if (unit && s[0] == 0) s[0] = 1;
  return s;
}

SeriesEvaluator::Lookup lookup_for(const AugmentedSystem& sys, const SeriesSolution& sol, std::size_t order) {
  return [&sys, &sol, order](const Symbol& s) -> TruncSeries {
    if (auto it = sys.index.find(s); it != sys.index.end()) return sol.z[it->second].truncated(order);
    for (std::size_t i = 0; i < sys.known_inputs.size(); ++i) {
      if (sys.known_inputs[i].base.name == s.name && s.order == 0) return sol.inputs[i].truncated(order);
    }
    FAIL("unexpected symbol " << s.display());
    return TruncSeries(order, PrimeField(sol.prime));
  };
}

struct Solved {
  AugmentedSystem sys;
  SeriesSolution sol;
};

Solved solve_at_random_point(const ModelDef& md, std::size_t order, std::uint64_t p, std::uint64_t seed) {
  Solved s{augment(md), {}};
  const PrimeField f(p);
  for (int attempt = 0; attempt < 25; ++attempt) {
    const SeriesPoint pt = sample_series_point(s.sys, order, f, seed, 0, attempt);
    try {
      s.sol = series_solve(s.sys, pt.z0, pt.inputs, order, f);
      return s;
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::DivisionByZeroModP);
    }
  }
  FAIL("no regular point found");
  return s;
}

Residue factorial(std::size_t k, const PrimeField& f) {
  Residue r = 1;
  for (std::size_t i = 2; i <= k; ++i) r = f.mul(r, f.from_int(static_cast<long long>(i)));
  return r;
}

}  // namespace

TEST_CASE("series arithmetic against schoolbook oracles") {
  const PrimeField f(kP);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 8;
    const TruncSeries a = random_series(rng, n, f, false);
    const TruncSeries b = random_series(rng, n, f, true);
    const TruncSeries ab = a * b;
    CHECK(std::vector<Residue>(ab.coefficients().begin(), ab.coefficients().end()) ==
          naive_product(a.coefficients(), b.coefficients(), n, kP));
    CHECK((a + b) - b == a);
    CHECK(-(-a) == a);
    // (a / b) * b == a in F_p[t]/(t^(n+1))
    CHECK(a * b.inverse() * b == a);
    CHECK(b.inverse() * b == TruncSeries::constant(n, 1, f));
    CHECK(b.pow(3) == b * b * b);
    CHECK(b.pow(-2) == (b * b).inverse());
    CHECK(b.pow(0) == TruncSeries::constant(n, 1, f));
    // integral then derivative is the identity, derivative then integral restores all but c0
    CHECK(a.integral(7).derivative() == a);
    CHECK(a.derivative().integral(a[0]) == a);
    CHECK(a.scaled(3) == a + a + a);
    CHECK(a.truncated(n + 2).truncated(n) == a);
  }
  TruncSeries z(3, f);
  z[1] = 1;
  CHECK_THROWS_AS(z.inverse(), Error);
  // mixed orders truncate at the smaller
  const TruncSeries lo = TruncSeries::constant(2, 2, f);
  const TruncSeries hi = TruncSeries::constant(5, 3, f);
  CHECK((lo * hi).order() == 2);
}

TEST_CASE("exponential decay series in closed form") {
  const ModelDef md = toy("decay");
  const AugmentedSystem sys = augment(md);
  const PrimeField f(kP);
  const std::vector<Residue> z0{3, 5};
  const SeriesSolution sol = series_solve(sys, z0, {}, 4, f);
  REQUIRE(sol.z.size() == 2);
  Rational fact = 1;
  for (std::size_t k = 0; k <= 4; ++k) {
    if (k > 0) fact *= static_cast<long>(k);
    const Rational expected = Rational(3) * [&] {
      Rational pw = 1;
      for (std::size_t i = 0; i < k; ++i) pw *= -5;
      return pw;
    }() / fact;
    CHECK(sol.z[0][k] == f.from_rational(expected));
    CHECK(sol.z[1][k] == (k == 0 ? 5u : 0u));
  }
  // S(0) = I
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t l = 0; l < 2; ++l) CHECK(sol.sensitivity[k][l][0] == (k == l ? 1u : 0u));
}

TEST_CASE("output_jacobian examples") {
  const PrimeField f(kP);
  SUBCASE("decay at order one") {
    const AugmentedSystem sys = augment(toy("decay"));
    const std::vector<Residue> z0{11, 13};
    const SeriesSolution sol = series_solve(sys, z0, {}, 1, f);
    const ModMatrix j = output_jacobian(sol, sys);
    REQUIRE(j.rows() == 2);
    CHECK(j.at(0, 0) == 1);
    CHECK(j.at(0, 1) == 0);
    CHECK(j.at(1, 0) == f.neg(13));
    CHECK(j.at(1, 1) == f.neg(11));
  }
  SUBCASE("constant output") {
    const ModelDef md = parse_model("model m\nstates x\nparams k\nddt x = -k*x\noutput y = 3\n");
    const AugmentedSystem sys = augment(md);
    const SeriesSolution sol = series_solve(sys, std::vector<Residue>{2, 3}, {}, 2, f);
    const ModMatrix j = output_jacobian(sol, sys);
    CHECK(rank(j, f) == 0);
    CHECK(j == ModMatrix(3, 2));
  }
  SUBCASE("shape law") {
    const ModelDef md = parse_model(
        "model m\nstates x y\nparams k\nddt x = -k*x\nddt y = x - y\noutput o1 = x\noutput o2 = y\n");
    const AugmentedSystem sys = augment(md);
    const SeriesSolution sol = series_solve(sys, std::vector<Residue>{2, 3, 5}, {}, 2, f);
    const ModMatrix j = output_jacobian(sol, sys);
    CHECK(j.rows() == 6);
    CHECK(j.cols() == 3);
  }
}

TEST_CASE("output_jacobian matches the symbolic matrix scaled by factorials") {
  const PrimeField f(kP);
  for (const char* stem : {"c2m_a", "c2m_c", "hiv1_a", "pk1", "beta_ig", "gene_p53"}) {
    CAPTURE(stem);
    const ModelDef md = testsupport::corpus_model(stem);
    const std::size_t N = 3;
    const Solved s = solve_at_random_point(md, N, kP, 4);
    const ModMatrix jac = output_jacobian(s.sol, s.sys);
    const ObservabilityMatrix om = build_matrix(s.sys, N);
    const std::size_t m = s.sys.outputs.size();
    std::map<Symbol, Residue> pt;
    for (std::size_t k = 0; k < s.sys.n_z(); ++k) pt[s.sys.z[k]] = s.sol.z0[k];
    for (std::size_t i = 0; i < s.sys.known_inputs.size(); ++i) {
      for (std::size_t j = 0; j <= 2 * N + 1; ++j) {
        const Residue cj = j <= N ? s.sol.inputs[i][j] : 0;
        pt[s.sys.known_inputs[i].base.derivative(static_cast<int>(j))] = f.mul(factorial(j, f), cj);
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j <= N; ++j) {
        const std::size_t jrow = i * (N + 1) + j;
        const std::size_t orow = j * m + i;
        for (std::size_t k = 0; k < s.sys.n_z(); ++k) {
          CHECK(f.mul(factorial(j, f), jac.at(jrow, k)) == eval_mod_p(om.rows[orow][k], pt, kP));
        }
      }
    }
  }
}

TEST_CASE("series residuals over the light rational corpus") {
  for (const auto& entry : testsupport::light_entries(true)) {
    CAPTURE(entry.label);
    const ModelDef md = testsupport::load(entry);
    const std::size_t N = std::max<std::size_t>(1, std::min<std::size_t>(6, augment(md).n_z() - 1));
    const Solved s = solve_at_random_point(md, N, kP, 1);
    const PrimeField f(kP);
    const std::size_t n = s.sys.n_z();
    REQUIRE(s.sol.z.size() == n);

    // dz/dt - F(z, u) = 0 through t^(N-1)
    SeriesEvaluator ev(f, N - 1, lookup_for(s.sys, s.sol, N - 1));
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(s.sol.z[k].derivative() == ev(s.sys.dynamics[k]));
      CHECK(s.sol.z[k][0] == s.sol.z0[k]);
    }

    // dS/dt - J_F S = 0 through t^(N-1); S(0) = I
    std::vector<std::vector<TruncSeries>> J(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t l = 0; l < n; ++l) J[k].push_back(ev(differentiate(s.sys.dynamics[k], s.sys.z[l])));
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = 0; l < n; ++l) {
        TruncSeries rhs(N - 1, f);
        for (std::size_t r = 0; r < n; ++r) rhs += J[k][r] * s.sol.sensitivity[r][l].truncated(N - 1);
        CHECK(s.sol.sensitivity[k][l].derivative() == rhs);
        CHECK(s.sol.sensitivity[k][l][0] == (k == l ? 1u : 0u));
      }
    }
    // parameters stay constant
    for (std::size_t k = md.n(); k < md.n() + md.p(); ++k) {
      CHECK(s.sol.z[k] == TruncSeries::constant(N, s.sol.z0[k], f));
    }
  }
}

TEST_CASE("analyze_ffprob toy models") {
  auto verdicts = [](const AnalysisReport& r) {
    std::map<std::string, std::string> m;
    for (const auto& v : r.verdicts) m[v.symbol] = v.label();
    return m;
  };
  const AnalysisReport decay = analyze_ffprob(toy("decay"));
  CHECK(decay.rank == 2u);
  CHECK(decay.stop_reason == "full_rank");
  CHECK(verdicts(decay) == std::map<std::string, std::string>{{"x", "observable"}, {"k", "SLI"}});
  CHECK(decay.trial_ranks.size() == kDefaultFfprobPrimes.size() * 2);
  CHECK(decay.primes == kDefaultFfprobPrimes);

  const AnalysisReport sum = analyze_ffprob(toy("sum_rates"));
  CHECK(sum.rank == 2u);
  CHECK(verdicts(sum) == std::map<std::string, std::string>{{"x", "observable"}, {"th1", "SU"}, {"th2", "SU"}});

  const AnalysisReport sc = analyze_ffprob(toy("scaling"));
  CHECK(verdicts(sc) == std::map<std::string, std::string>{{"x", "unobservable"}, {"th", "SLI"}, {"c", "SU"}});
}

TEST_CASE("non-rational models are refused") {
  try {
    analyze_ffprob(testsupport::corpus_model("competition"));
    FAIL("expected NonRationalExpr");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonRationalExpr);
    CHECK(std::string(e.what()).find("ln(") != std::string::npos);
    CHECK(std::string(e.what()).find("symbolic") != std::string::npos);
  }
}

TEST_CASE("option validation") {
  const ModelDef md = toy("decay");
  auto code_of = [&](const FfprobOptions& o) {
    try {
      analyze_ffprob(md, o);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  FfprobOptions o;
  o.primes = {101};
  CHECK(code_of(o) == ErrorCode::InvalidArgument);
  o.primes = {kMinFfprobPrime};
  CHECK(code_of(o) == ErrorCode::InvalidArgument);
  o.primes = {2147483649ULL};
  CHECK(code_of(o) == ErrorCode::InvalidArgument);
  o.primes = {};
  CHECK(code_of(o) == ErrorCode::InvalidArgument);
  o = {};
  o.trials = 0;
  CHECK(code_of(o) == ErrorCode::InvalidArgument);
  o = {};
  o.order = 0;
  CHECK(code_of(o) == ErrorCode::InvalidArgument);
  o = {};
  o.timeout_s = 1e-9;
  CHECK_THROWS_AS(analyze_ffprob(testsupport::corpus_model("gene_p53"), o), Error);
}

TEST_CASE("cross_check_lie") {
  CHECK(cross_check_lie(toy("decay"), 3, kP, 0));
  for (const auto& entry : testsupport::light_entries(true)) CHECK(cross_check_lie(testsupport::load(entry), 0, kP, 5));
  CHECK(cross_check_lie(testsupport::corpus_model("c2m_a"), 3, kP, 0));
}

TEST_CASE("rank bounds and determinism over the light rational corpus") {
  for (const auto& entry : testsupport::light_entries(true)) {
    CAPTURE(entry.label);
    const ModelDef md = testsupport::load(entry);
    const AnalysisReport r = analyze_ffprob(md);
    REQUIRE(r.rank.has_value());
    CHECK(*r.rank <= r.n_z);
    for (const auto& t : r.trial_ranks) CHECK(t.rank <= *r.rank);
    CHECK(std::any_of(r.trial_ranks.begin(), r.trial_ranks.end(), [&](const TrialRank& t) { return t.rank == *r.rank; }));
    CHECK(r.order == static_cast<int>(std::max<std::size_t>(1, r.n_z - 1)));
    CHECK(r.verdicts.size() == r.n_z);
    CHECK(report_to_json(analyze_ffprob(md), {false}) == report_to_json(r, {false}));
  }
}
