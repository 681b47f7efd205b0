#include "identiscope/model.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "identiscope/errors.hpp"

namespace identiscope {

namespace {

enum class Tok { Ident, Number, Plus, Minus, Star, Slash, Caret, LParen, RParen, Equals, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::Ident: return "identifier '" + t.text + "'";
    case Tok::Number: return "number '" + t.text + "'";
    case Tok::End: return "end of line";
    default: return "'" + t.text + "'";
  }
}

/// Tokens for one source line; the final token is always End.
std::vector<Token> tokenize_line(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.line = line_no;
    t.column = i + 1;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(line.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      if (j < line.size() && line[j] == '.') {
        ++j;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      }
      t.kind = Tok::Number;
      t.text = std::string(line.substr(i, j - i));
      if (t.text == ".") throw ParseError(ErrorCode::SyntaxError, line_no, i + 1, "stray '.'");
      i = j;
    } else {
      static const std::unordered_map<char, Tok> singles = {
          {'+', Tok::Plus},   {'-', Tok::Minus},  {'*', Tok::Star},   {'/', Tok::Slash},
          {'^', Tok::Caret},  {'(', Tok::LParen}, {')', Tok::RParen}, {'=', Tok::Equals}};
      auto it = singles.find(c);
      if (it == singles.end()) {
        throw ParseError(ErrorCode::SyntaxError, line_no, i + 1, std::string("unexpected character '") + c + "'");
      }
      t.kind = it->second;
      t.text = std::string(1, c);
      ++i;
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.line = line_no;
  end.column = line.size() + 1;
  out.push_back(end);
  return out;
}

Rational parse_number(const Token& t) {
  const auto dot = t.text.find('.');
  if (dot == std::string::npos) return Rational(mpz_class(t.text));
  const std::string whole = t.text.substr(0, dot);
  const std::string frac = t.text.substr(dot + 1);
  mpz_class num(whole.empty() ? "0" : whole);
  mpz_class scale = 1;
  for (char ch : frac) {
    num = num * 10 + (ch - '0');
    scale *= 10;
  }
  Rational q(num, scale);
  q.canonicalize();
  return q;
}

const std::set<std::string, std::less<>>& keywords() {
  static const std::set<std::string, std::less<>> k = {
      "model", "states", "params", "inputs", "unknown_inputs", "ddt", "output",
      "ic",    "constant", "order", "ln",    "exp",            "sin", "cos"};
  return k;
}

struct Declared {
  Symbol symbol;
  std::size_t line;
  std::size_t column;
};

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& toks, std::size_t pos,
             const std::unordered_map<std::string, Declared>& table, bool params_only)
      : toks_(toks), pos_(pos), table_(table), params_only_(params_only) {}

  Expr parse_full() {
    Expr e = parse_sum();
    if (peek().kind != Tok::End) fail(peek(), "expected operator or end of line, found " + describe(peek()));
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  [[noreturn]] static void fail(const Token& t, const std::string& msg,
                                ErrorCode code = ErrorCode::SyntaxError) {
    throw ParseError(code, t.line, t.column, msg);
  }

  Expr parse_sum() {
    std::vector<Expr> terms{parse_term()};
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const bool minus = take().kind == Tok::Minus;
      Expr t = parse_term();
      terms.push_back(minus ? -t : t);
    }
    return sum(std::move(terms));
  }

  Expr parse_term() {
    Expr acc = parse_unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const Token& op = take();
      Expr rhs = parse_unary();
      if (op.kind == Tok::Star) {
        acc = acc * rhs;
      } else {
        if (rhs.is_zero()) fail(op, "division by the constant 0");
        acc = acc / rhs;
      }
    }
    return acc;
  }

  Expr parse_unary() {
    if (peek().kind == Tok::Minus) {
      take();
      return -parse_unary();
    }
    if (peek().kind == Tok::Plus) {
      take();
      return parse_unary();
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    while (peek().kind == Tok::Caret) {
      take();
      const long n = parse_exponent();
      if (base.is_zero() && n < 0) fail(toks_[pos_ - 1], "zero raised to a negative power");
      base = power(base, n);
    }
    return base;
  }

  static constexpr const char* kExponentHint =
      "exponents must be integer literals; round non-integer exponents to the closest integer "
      "(the usual convention for rational-model identifiability tools)";

  long parse_exponent() {
    bool paren = false;
    if (peek().kind == Tok::LParen) {
      paren = true;
      take();
    }
    bool negative = false;
    if (peek().kind == Tok::Minus) {
      negative = true;
      take();
    }
    const Token& t = peek();
    if (t.kind != Tok::Number || t.text.find('.') != std::string::npos) {
      if (t.kind == Tok::Number || t.kind == Tok::Ident || t.kind == Tok::LParen) {
        fail(t, std::string("non-integer exponent: ") + kExponentHint, ErrorCode::NonIntegerExponent);
      }
      fail(t, "expected integer exponent, found " + describe(t));
    }
    take();
    if (paren) {
      if (peek().kind == Tok::Slash) {
        fail(peek(), std::string("non-integer exponent: ") + kExponentHint, ErrorCode::NonIntegerExponent);
      }
      if (peek().kind != Tok::RParen) fail(peek(), "expected ')', found " + describe(peek()));
      take();
    }
    if (t.text.size() > 7) fail(t, "exponent too large");
    const long v = std::stol(t.text);
    return negative ? -v : v;
  }

  Expr parse_primary() {
    const Token& t = take();
    switch (t.kind) {
      case Tok::Number: return Expr(parse_number(t));
      case Tok::LParen: {
        Expr e = parse_sum();
        if (peek().kind != Tok::RParen) fail(peek(), "expected ')', found " + describe(peek()));
        take();
        return e;
      }
      case Tok::Ident: {
        static const std::unordered_map<std::string, FuncKind> funcs = {
            {"ln", FuncKind::Ln}, {"exp", FuncKind::Exp}, {"sin", FuncKind::Sin}, {"cos", FuncKind::Cos}};
        if (auto f = funcs.find(t.text); f != funcs.end()) {
          if (peek().kind != Tok::LParen) fail(peek(), "expected '(' after " + t.text);
          take();
          const bool periodic = f->second != FuncKind::Ln;
          if (periodic) ++time_ok_;
          Expr arg = parse_sum();
          if (periodic) --time_ok_;
          if (peek().kind != Tok::RParen) fail(peek(), "expected ')', found " + describe(peek()));
          take();
          return apply(f->second, arg);
        }
        return resolve(t);
      }
      default: fail(t, "expected expression, found " + describe(t));
    }
  }

  Expr resolve(const Token& t) {
    if (auto it = table_.find(t.text); it != table_.end()) {
      const Symbol& s = it->second.symbol;
      if (params_only_ && s.kind != SymbolKind::Parameter) {
        fail(t, "initial conditions may only depend on parameters; '" + t.text + "' is a " +
                    std::string(to_string(s.kind)));
      }
      return Expr(s);
    }
    if (t.text == "t") {
      if (time_ok_ == 0 || params_only_) {
        fail(t, "the time symbol t may only appear inside sin(), cos() or exp()", ErrorCode::InvalidTimeUse);
      }
      return Expr(Symbol::time());
    }
    fail(t, "undeclared symbol '" + t.text + "'", ErrorCode::UndeclaredSymbol);
  }

  const std::vector<Token>& toks_;
  std::size_t pos_;
  const std::unordered_map<std::string, Declared>& table_;
  bool params_only_;
  int time_ok_ = 0;
};

struct Line {
  std::vector<Token> toks;
};

[[noreturn]] void fail_at(const Token& t, ErrorCode code, const std::string& msg) {
  throw ParseError(code, t.line, t.column, msg);
}

const Token& expect_ident(const std::vector<Token>& toks, std::size_t i, const std::string& what) {
  const Token& t = toks[i];
  if (t.kind != Tok::Ident) fail_at(t, ErrorCode::SyntaxError, "expected " + what + ", found " + describe(t));
  if (keywords().count(t.text) != 0) fail_at(t, ErrorCode::SyntaxError, "'" + t.text + "' is a reserved word");
  return t;
}

}  // namespace

bool ModelDef::is_rational() const {
  for (const auto& f : dynamics) {
    if (!f.rational()) return false;
  }
  for (const auto& o : outputs) {
    if (!o.expr.rational()) return false;
  }
  return true;
}

ModelDef parse_model(std::string_view text) {
  std::vector<Line> lines;
  {
    std::size_t line_no = 1;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view raw = text.substr(start, end - start);
      if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
      auto toks = tokenize_line(raw, line_no);
      if (toks.size() > 1) lines.push_back({std::move(toks)});
      start = end + 1;
      ++line_no;
    }
  }

  ModelDef md;
  md.name = "model";
  std::unordered_map<std::string, Declared> table;
  auto declare = [&](const Token& t, Symbol s) {
    if (t.text == "t") fail_at(t, ErrorCode::SyntaxError, "'t' is reserved for time");
    auto [it, inserted] = table.try_emplace(t.text, Declared{s, t.line, t.column});
    if (!inserted) {
      fail_at(t, ErrorCode::DuplicateDeclaration,
              "'" + t.text + "' already declared at line " + std::to_string(it->second.line));
    }
  };

  // Pass 1: declarations.
  bool have_name = false;
  for (const auto& ln : lines) {
    const auto& toks = ln.toks;
    const Token& kw = toks[0];
    if (kw.kind != Tok::Ident) fail_at(kw, ErrorCode::SyntaxError, "expected a statement keyword, found " + describe(kw));
    if (kw.text == "model") {
      const Token& name = expect_ident(toks, 1, "model name");
      if (toks[2].kind != Tok::End) fail_at(toks[2], ErrorCode::SyntaxError, "expected end of line after model name");
      if (have_name) fail_at(kw, ErrorCode::DuplicateDeclaration, "model name given twice");
      md.name = name.text;
      have_name = true;
    } else if (kw.text == "states" || kw.text == "params") {
      if (toks[1].kind == Tok::End) fail_at(toks[1], ErrorCode::SyntaxError, "expected at least one name");
      for (std::size_t i = 1; toks[i].kind != Tok::End; ++i) {
        const Token& t = expect_ident(toks, i, "name");
        Symbol s = kw.text == "states" ? Symbol::state(t.text) : Symbol::parameter(t.text);
        declare(t, s);
        (kw.text == "states" ? md.states : md.params).push_back(s);
      }
    } else if (kw.text == "inputs") {
      if (toks[1].kind == Tok::End) fail_at(toks[1], ErrorCode::SyntaxError, "expected at least one input");
      for (std::size_t i = 1; toks[i].kind != Tok::End; ++i) {
        const Token& t = expect_ident(toks, i, "input name");
        Symbol s = Symbol::known_input(t.text);
        declare(t, s);
        InputSpec spec{s, InputMode::Generic};
        if (toks[i + 1].kind == Tok::Ident && toks[i + 1].text == "constant") {
          spec.mode = InputMode::Constant;
          ++i;
        }
        md.known_inputs.push_back(spec);
      }
    } else if (kw.text == "unknown_inputs") {
      if (toks[1].kind == Tok::End) fail_at(toks[1], ErrorCode::SyntaxError, "expected at least one unknown input");
      for (std::size_t i = 1; toks[i].kind != Tok::End; ++i) {
        const Token& t = expect_ident(toks, i, "unknown input name");
        Symbol s = Symbol::unknown_input(t.text);
        declare(t, s);
        UnknownInputSpec spec{s, 1};
        if (toks[i + 1].kind == Tok::Ident && toks[i + 1].text == "order") {
          const Token& n = toks[i + 2];
          if (n.kind != Tok::Number || n.text.find('.') != std::string::npos || n.text.size() > 4) {
            fail_at(n, ErrorCode::SyntaxError, "expected a nonnegative integer truncation order");
          }
          spec.truncation_order = std::stoi(n.text);
          i += 2;
        }
        md.unknown_inputs.push_back(spec);
      }
    } else if (kw.text != "ddt" && kw.text != "output" && kw.text != "ic") {
      fail_at(kw, ErrorCode::SyntaxError, "unknown statement '" + kw.text + "'");
    }
  }

  // Pass 2: equations.
  std::map<std::string, Expr> rhs;
  std::set<std::string> output_names;
  for (const auto& ln : lines) {
    const auto& toks = ln.toks;
    const std::string& kw = toks[0].text;
    if (kw != "ddt" && kw != "output" && kw != "ic") continue;
    const Token& target = expect_ident(toks, 1, kw == "output" ? "output name" : "state name");
    if (toks[2].kind != Tok::Equals) fail_at(toks[2], ErrorCode::SyntaxError, "expected '=', found " + describe(toks[2]));
    if (toks[3].kind == Tok::End) fail_at(toks[3], ErrorCode::SyntaxError, "expected expression");

    if (kw == "output") {
      if (table.count(target.text) != 0 || !output_names.insert(target.text).second) {
        fail_at(target, ErrorCode::DuplicateDeclaration, "output name '" + target.text + "' is already in use");
      }
      ExprParser ep(toks, 3, table, false);
      md.outputs.push_back({target.text, ep.parse_full()});
      continue;
    }
    auto it = table.find(target.text);
    if (it == table.end()) fail_at(target, ErrorCode::UndeclaredSymbol, "undeclared state '" + target.text + "'");
    if (it->second.symbol.kind != SymbolKind::State) {
      fail_at(target, ErrorCode::SyntaxError, "'" + target.text + "' is not a state");
    }
    if (kw == "ddt") {
      if (rhs.count(target.text) != 0) {
        fail_at(target, ErrorCode::DuplicateDeclaration, "second ddt line for '" + target.text + "'");
      }
      ExprParser ep(toks, 3, table, false);
      rhs.emplace(target.text, ep.parse_full());
    } else {
      for (const auto& ic : md.ics) {
        if (ic.state.name == target.text) {
          fail_at(target, ErrorCode::DuplicateDeclaration, "second ic line for '" + target.text + "'");
        }
      }
      ExprParser ep(toks, 3, table, true);
      md.ics.push_back({it->second.symbol, ep.parse_full()});
    }
  }

  for (const auto& s : md.states) {
    auto it = rhs.find(s.name);
    if (it == rhs.end()) {
      const Declared& d = table.at(s.name);
      throw ParseError(ErrorCode::MissingDynamics, d.line, d.column, "state '" + s.name + "' has no ddt line");
    }
    md.dynamics.push_back(it->second);
  }
  if (md.states.empty()) throw ParseError(ErrorCode::SyntaxError, 1, 1, "model declares no states");
  if (md.outputs.empty()) throw ParseError(ErrorCode::SyntaxError, 1, 1, "model declares no outputs");
  return md;
}

ModelDef load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string print_model(const ModelDef& md) {
  std::ostringstream out;
  out << "model " << md.name << "\n";
  auto names = [&](const char* kw, const std::vector<Symbol>& syms) {
    if (syms.empty()) return;
    out << kw;
    for (const auto& s : syms) out << ' ' << s.name;
    out << "\n";
  };
  names("states", md.states);
  names("params", md.params);
  if (!md.known_inputs.empty()) {
    out << "inputs";
    for (const auto& u : md.known_inputs) {
      out << ' ' << u.base.name;
      if (u.mode == InputMode::Constant) out << " constant";
    }
    out << "\n";
  }
  if (!md.unknown_inputs.empty()) {
    out << "unknown_inputs";
    for (const auto& w : md.unknown_inputs) out << ' ' << w.base.name << " order " << w.truncation_order;
    out << "\n";
  }
  for (std::size_t i = 0; i < md.states.size(); ++i) {
    out << "ddt " << md.states[i].name << " = " << to_string(md.dynamics[i]) << "\n";
  }
  for (const auto& o : md.outputs) out << "output " << o.name << " = " << to_string(o.expr) << "\n";
  for (const auto& ic : md.ics) out << "ic " << ic.state.name << " = " << to_string(ic.value) << "\n";
  return out.str();
}

void validate(const ModelDef& md) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (md.dynamics.size() != md.states.size()) bad("dynamics must have one entry per state");
  if (md.outputs.empty()) bad("model needs at least one output");
  std::set<Symbol> allowed;
  std::set<std::string> names;
  auto add = [&](const Symbol& s) {
    if (!names.insert(s.name).second) bad("duplicate name " + s.name);
    allowed.insert(s);
  };
  for (const auto& s : md.states) {
    if (s.kind != SymbolKind::State) bad(s.name + " is listed as a state but has kind " + std::string(to_string(s.kind)));
    add(s);
  }
  for (const auto& s : md.params) {
    if (s.kind != SymbolKind::Parameter) bad(s.name + " is listed as a parameter with the wrong kind");
    add(s);
  }
  for (const auto& u : md.known_inputs) {
    if (u.base.kind != SymbolKind::KnownInput || u.base.order != 0) bad(u.base.name + " is not a known input symbol");
    add(u.base);
  }
  for (const auto& w : md.unknown_inputs) {
    if (w.base.kind != SymbolKind::UnknownInput || w.base.order != 0) bad(w.base.name + " is not an unknown input symbol");
    if (w.truncation_order < 0) bad("negative truncation order for " + w.base.name);
    add(w.base);
  }
  allowed.insert(Symbol::time());
  for (const auto& o : md.outputs) {
    if (!names.insert(o.name).second) bad("duplicate name " + o.name);
  }
  auto check = [&](const Expr& e) {
    for (const auto& s : free_symbols(e)) {
      if (allowed.count(s) == 0) bad("undeclared symbol " + s.display());
    }
  };
  for (const auto& f : md.dynamics) check(f);
  for (const auto& o : md.outputs) check(o.expr);
}

}  // namespace identiscope
