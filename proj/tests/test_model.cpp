#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "identiscope/errors.hpp"
#include "identiscope/model.hpp"
#include "support.hpp"

using namespace identiscope;

namespace {

const char* kMinimal = "model m\nstates x\nparams k\nddt x = -k*x\noutput y = x\n";

ParseError parse_error(const std::string& src) {
  try {
    parse_model(src);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a parse error for:\n" << src);
  return ParseError(ErrorCode::SyntaxError, 0, 0, "");
}

std::string squash(const std::string& s) {
  std::string out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out += tok + " ";
  return out;
}

}  // namespace

TEST_CASE("minimal model") {
  const ModelDef md = parse_model(kMinimal);
  CHECK(md.name == "m");
  CHECK(md.n() == 1);
  CHECK(md.p() == 1);
  CHECK(md.m() == 1);
  CHECK(md.q() == 0);
  CHECK(md.q_w() == 0);
  const Expr x(Symbol::state("x")), k(Symbol::parameter("k"));
  CHECK(md.dynamics[0] == -k * x);
  CHECK(md.outputs[0].expr == x);
  CHECK(md.is_rational());
}

TEST_CASE("C2M a dimensions") {
  const ModelDef md = testsupport::corpus_model("c2m_a");
  CHECK(md.n() == 2);
  CHECK(md.p() == 4);
  CHECK(md.q() == 1);
  CHECK(md.q_w() == 0);
  CHECK(md.m() == 1);
  const Expr x1(Symbol::state("x1")), V(Symbol::parameter("V"));
  CHECK(md.outputs[0].expr == x1 / V);
}

TEST_CASE("declarations, comments and literals") {
  const std::string src =
      "# header comment\n"
      "model demo   # trailing\n"
      "states a b\n"
      "params k1 k2\n"
      "inputs u constant v\n"
      "unknown_inputs w order 2 r\n"
      "\n"
      "ddt a = -k1*a + 3/4*u + 0.25*w\n"
      "ddt b = k1*a - k2*b*sin(t) + v + r\n"
      "output y1 = a\n"
      "output y2 = b/(1 + a)^2\n"
      "ic a = k2\n";
  const ModelDef md = parse_model(src);
  CHECK(md.name == "demo");
  REQUIRE(md.known_inputs.size() == 2);
  CHECK(md.known_inputs[0].mode == InputMode::Constant);
  CHECK(md.known_inputs[1].mode == InputMode::Generic);
  REQUIRE(md.unknown_inputs.size() == 2);
  CHECK(md.unknown_inputs[0].truncation_order == 2);
  CHECK(md.unknown_inputs[1].truncation_order == 1);
  REQUIRE(md.ics.size() == 1);
  CHECK(md.ics[0].value == Expr(Symbol::parameter("k2")));
  CHECK_FALSE(md.is_rational());
  const Expr a(Symbol::state("a")), k1(Symbol::parameter("k1"));
  const Expr u(Symbol::known_input("u")), w(Symbol::unknown_input("w"));
  CHECK(md.dynamics[0] == -k1 * a + Expr(Rational(3, 4)) * u + Expr(Rational(1, 4)) * w);
}

TEST_CASE("undeclared symbol") {
  const auto e = parse_error("model m\nstates x\nparams k\nddt x = -k*x\noutput y = z\n");
  CHECK(e.code() == ErrorCode::UndeclaredSymbol);
  CHECK(e.line() == 5);
  CHECK(e.column() == 12);
}

TEST_CASE("syntax errors carry a location") {
  auto e = parse_error("model m\nstates x\nparams k\nddt x = -k*\noutput y = x\n");
  CHECK(e.code() == ErrorCode::SyntaxError);
  CHECK(e.line() == 4);
  CHECK(e.column() == 12);

  e = parse_error("model m\nstates x\nparams k\nddt x = -k*x $\noutput y = x\n");
  CHECK(e.code() == ErrorCode::SyntaxError);
  CHECK(e.line() == 4);
  CHECK(e.column() == 14);

  e = parse_error("model m\nstates x\nparams k\nddt x = (k*x\noutput y = x\n");
  CHECK(e.code() == ErrorCode::SyntaxError);
  CHECK(e.line() == 4);

  e = parse_error("model m\nstates x\nfoo x\nddt x = x\noutput y = x\n");
  CHECK(e.code() == ErrorCode::SyntaxError);
  CHECK(e.line() == 3);
  CHECK(e.column() == 1);
  CHECK(std::string(e.what()).find("3:1") != std::string::npos);
}

TEST_CASE("duplicate declarations") {
  auto e = parse_error("model m\nstates x\nparams k x\nddt x = -k*x\noutput y = x\n");
  CHECK(e.code() == ErrorCode::DuplicateDeclaration);
  CHECK(e.line() == 3);
  CHECK(e.column() == 10);

  e = parse_error("model m\nstates x\nparams k\nddt x = -k*x\nddt x = k\noutput y = x\n");
  CHECK(e.code() == ErrorCode::DuplicateDeclaration);
  CHECK(e.line() == 5);
}

TEST_CASE("missing dynamics") {
  const auto e = parse_error("model m\nstates x y\nparams k\nddt x = -k*x\noutput o = x\n");
  CHECK(e.code() == ErrorCode::MissingDynamics);
  CHECK(e.line() == 2);
  CHECK(e.column() == 10);
}

TEST_CASE("non-integer exponents are rejected") {
  auto e = parse_error("model m\nstates x\nparams k\nddt x = -k*x^1.5\noutput y = x\n");
  CHECK(e.code() == ErrorCode::NonIntegerExponent);
  CHECK(e.line() == 4);
  e = parse_error("model m\nstates x\nparams k\nddt x = -k*x^k\noutput y = x\n");
  CHECK(e.code() == ErrorCode::NonIntegerExponent);
  CHECK(std::string(e.what()).find("closest integer") != std::string::npos);
}

TEST_CASE("time only inside transcendental functions") {
  auto e = parse_error("model m\nstates x\nparams k\nddt x = -k*x + t\noutput y = x\n");
  CHECK(e.code() == ErrorCode::InvalidTimeUse);
  CHECK(e.line() == 4);
  CHECK(e.column() == 16);
  const ModelDef md = parse_model("model m\nstates x\nparams k\nddt x = -k*x*cos(k*t)\noutput y = x\n");
  CHECK_FALSE(md.is_rational());
}

TEST_CASE("printer round trip on the minimal model") {
  const ModelDef md = parse_model(kMinimal);
  const std::string printed = print_model(md);
  CHECK(squash(printed) == squash(kMinimal));
  CHECK(parse_model(printed) == md);
}

TEST_CASE("printer round trip on every corpus model") {
  for (const auto& entry : testsupport::manifest()) {
    CAPTURE(entry.label);
    const ModelDef md = testsupport::load(entry);
    const std::string printed = print_model(md);
    const ModelDef again = parse_model(printed);
    CHECK(again == md);
    CHECK(print_model(again) == printed);
    std::size_t ddt = 0;
    std::istringstream in(printed);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("ddt ", 0) == 0) ++ddt;
    }
    CHECK(ddt == md.n());
  }
}

TEST_CASE("augment a one-state model") {
  const ModelDef md = parse_model(kMinimal);
  const AugmentedSystem sys = augment(md);
  REQUIRE(sys.n_z() == 2);
  CHECK(sys.z[0] == Symbol::state("x"));
  CHECK(sys.z[1] == Symbol::parameter("k"));
  CHECK(sys.roles == std::vector<VariableRole>{VariableRole::State, VariableRole::Parameter});
  CHECK(sys.dynamics[0] == -Expr(sys.z[1]) * Expr(sys.z[0]));
  CHECK(sys.dynamics[1].is_zero());
  CHECK(sys.index.at(Symbol::parameter("k")) == 1);
}

TEST_CASE("augment unknown-input chains") {
  SUBCASE("C2M c") {
    const AugmentedSystem sys = augment(testsupport::corpus_model("c2m_c"));
    CHECK(sys.n_z() == 2 + 4 + 2);
    const Symbol w = sys.z[6];
    CHECK(w.kind == SymbolKind::UnknownInput);
    CHECK(w.order == 0);
    CHECK(sys.z[7] == w.derivative(1));
    CHECK(sys.dynamics[6] == Expr(sys.z[7]));
    CHECK(sys.dynamics[7].is_zero());
  }
  SUBCASE("two inputs truncated at order zero") {
    const ModelDef md = parse_model(
        "model m\nstates x\nparams a b\nunknown_inputs w1 order 0 w2 order 0\n"
        "ddt x = -a*x + w1 + b*w2\noutput y = x\n");
    const AugmentedSystem sys = augment(md);
    CHECK(sys.n_z() == md.n() + md.p() + 2);
    CHECK(sys.dynamics[3].is_zero());
    CHECK(sys.dynamics[4].is_zero());
    CHECK_FALSE(sys.has_direct_feedthrough());
  }
  SUBCASE("direct feedthrough") {
    const ModelDef md = parse_model(
        "model m\nstates x\nparams a\nunknown_inputs w\nddt x = -a*x\noutput y = x + w\n");
    CHECK(augment(md).has_direct_feedthrough());
  }
}

TEST_CASE("augment invariants over the corpus") {
  for (const auto& entry : testsupport::manifest()) {
    CAPTURE(entry.label);
    const ModelDef md = testsupport::load(entry);
    const AugmentedSystem sys = augment(md);
    std::size_t chains = 0;
    for (const auto& w : md.unknown_inputs) chains += static_cast<std::size_t>(w.truncation_order) + 1;
    CHECK(sys.n_z() == md.n() + md.p() + chains);
    CHECK(sys.dynamics.size() == sys.n_z());
    for (std::size_t k = md.n(); k < md.n() + md.p(); ++k) CHECK(sys.dynamics[k].is_zero());
    std::set<Symbol> allowed(sys.z.begin(), sys.z.end());
    std::vector<Expr> exprs(sys.dynamics);
    for (const auto& o : sys.outputs) exprs.push_back(o.expr);
    for (const auto& e : exprs) {
      for (const auto& s : free_symbols(e)) {
        const bool ok = allowed.count(s) != 0 || s.kind == SymbolKind::KnownInput || s.kind == SymbolKind::Time;
        CHECK_MESSAGE(ok, s.display());
      }
    }
    CHECK(augment(md) == sys);
  }
}

TEST_CASE("load_model reports missing files") {
  try {
    load_model("/nonexistent/model.idm");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}
