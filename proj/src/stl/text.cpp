#include "towerfleet/stl/text.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace towerfleet::stl {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = " \"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

void emit(const Formula& f, std::string& out) {
  const std::string label = f.label().empty() ? std::string{} : quoted(f.label());
  switch (f.op()) {
    case Op::Predicate: {
      out += "(mu" + label + " (";
      for (std::size_t i = 0; i < f.pred().terms.size(); ++i) {
        const auto& t = f.pred().terms[i];
        if (i) out += ' ';
        out += "(" + std::to_string(t.index) + " " + number(t.coeff) + ")";
      }
      out += ") " + number(f.pred().offset) + ")";
      return;
    }
    case Op::And:
    case Op::Or:
      out += f.op() == Op::And ? "(and" : "(or";
      out += label;
      for (const auto& c : f.children()) {
        out += ' ';
        emit(c, out);
      }
      out += ')';
      return;
    case Op::Globally:
    case Op::Eventually:
      out += f.op() == Op::Globally ? "(G" : "(F";
      out += label + " " + std::to_string(f.lo()) + " " + std::to_string(f.hi()) + " ";
      emit(f.children().front(), out);
      out += ')';
      return;
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Formula parse() {
    Formula f = formula();
    skip();
    if (pos_ != text_.size()) fail("trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw FormulaSyntaxError(what, pos_); }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string_view atom() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')' && text_[pos_] != '"') {
      ++pos_;
    }
    if (start == pos_) fail("expected token");
    return text_.substr(start, pos_ - start);
  }

  double real() {
    const auto tok = atom();
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) fail("bad number '" + std::string(tok) + "'");
    return v;
  }

  long integer() {
    const auto tok = atom();
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) fail("bad integer '" + std::string(tok) + "'");
    return v;
  }

  std::string label() {
    if (!peek('"')) return {};
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out += text_[pos_++];
    }
    if (pos_ >= text_.size()) fail("unterminated label");
    ++pos_;
    return out;
  }

  Formula formula() {
    expect('(');
    const std::string head(atom());
    std::string lbl = label();
    Formula f;
    if (head == "mu") {
      LinearPredicate pred;
      expect('(');
      while (!peek(')')) {
        expect('(');
        const long index = integer();
        if (index < 0) fail("negative signal index");
        const double coeff = real();
        expect(')');
        pred.terms.push_back(Term{static_cast<std::size_t>(index), coeff});
      }
      expect(')');
      pred.offset = real();
      try {
        f = Formula::predicate(std::move(pred), std::move(lbl));
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    } else if (head == "and" || head == "or") {
      std::vector<Formula> kids;
      while (!peek(')')) kids.push_back(formula());
      if (kids.empty()) fail("operator needs operands");
      f = head == "and" ? Formula::conjunction(std::move(kids), std::move(lbl))
                        : Formula::disjunction(std::move(kids), std::move(lbl));
    } else if (head == "G" || head == "F") {
      const long lo = integer();
      const long hi = integer();
      if (lo < 0 || hi < lo) fail("bad temporal window");
      Formula child = formula();
      f = head == "G" ? Formula::always(static_cast<int>(lo), static_cast<int>(hi), std::move(child), std::move(lbl))
                      : Formula::eventually(static_cast<int>(lo), static_cast<int>(hi), std::move(child),
                                            std::move(lbl));
    } else {
      fail("unknown operator '" + head + "'");
    }
    expect(')');
    return f;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_text(const Formula& f) {
  std::string out;
  emit(f, out);
  return out;
}

Formula parse_formula(std::string_view text) { return Parser(text).parse(); }

}  // namespace towerfleet::stl
