#include <cctype>
#include <map>

#include "sigforge/frontend.hpp"

namespace sigforge {
namespace {

enum class Tok { Ident, Int, Char, Str, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::Ident;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          t.text += advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.kind = Tok::Int;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += advance();
        t.value = std::stoll(t.text);
      } else if (c == '\'') {
        advance();
        t.kind = Tok::Char;
        t.value = static_cast<unsigned char>(read_char(t));
        expect_char('\'', t);
      } else if (c == '"') {
        advance();
        t.kind = Tok::Str;
        while (pos_ < src_.size() && src_[pos_] != '"') t.text += read_char(t);
        expect_char('"', t);
      } else {
        t.kind = Tok::Punct;
        static const char* kTwo[] = {"==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-="};
        for (const char* two : kTwo) {
          if (src_.substr(pos_, 2) == two) t.text = two;
        }
        if (t.text.empty()) {
          if (std::string_view("(){}[];,=<>+-*/%!&").find(c) == std::string_view::npos) {
            throw ParseError(line_, col_, "a token");
          }
          t.text = std::string(1, c);
        }
        for (std::size_t i = 0; i < t.text.size(); ++i) advance();
      }
      out.push_back(t);
    }
  }

 private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (src_.substr(pos_, 2) == "/*") {
        advance();
        advance();
        while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") advance();
        if (pos_ >= src_.size()) throw ParseError(line_, col_, "end of comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  char read_char(const Token& t) {
    if (pos_ >= src_.size()) throw ParseError(t.line, t.col, "closing quote");
    char c = advance();
    if (c != '\\') return c;
    if (pos_ >= src_.size()) throw ParseError(t.line, t.col, "escape sequence");
    char e = advance();
    switch (e) {
      case 'n': return '\n';
      case 't': return '\t';
      case '0': return '\0';
      case '\\': return '\\';
      case '\'': return '\'';
      case '"': return '"';
      default: throw ParseError(line_, col_, "valid escape sequence");
    }
  }

  void expect_char(char c, const Token& t) {
    if (pos_ >= src_.size() || src_[pos_] != c) throw ParseError(t.line, t.col, std::string("closing ") + c);
    advance();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string file, StmtId first_id)
      : toks_(std::move(toks)), file_(std::move(file)), next_id_(first_id) {}

  Program program() {
    Program p;
    p.file = file_;
    while (peek().kind != Tok::End) {
      Token start = peek();
      Type t = parse_base_type();
      Token name = expect_ident();
      if (is("(")) {
        FuncDef f;
        f.ret = t;
        f.name = name.text;
        f.loc = loc_of(start, kNoStmt);
        next();
        f.params = parse_params();
        expect(")");
        if (!is("{")) throw error("'{'");
        f.body = parse_block();
        f.loc.stmt_id = f.body.loc.stmt_id;
        p.functions.push_back(std::move(f));
      } else {
        Stmt d = finish_decl(start, t, name);
        expect(";");
        p.globals.push_back(std::move(d));
      }
    }
    return p;
  }

  Stmt single_statement() {
    Stmt s = parse_stmt();
    if (peek().kind != Tok::End) throw error("end of statement");
    return s;
  }

  ExprPtr single_expression() {
    ExprPtr e = parse_expr();
    if (peek().kind != Tok::End) throw error("end of expression");
    return e;
  }

 private:
  const Token& peek(int ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  Token next() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool is(const char* punct) const { return peek().kind == Tok::Punct && peek().text == punct; }
  bool is_kw(const char* kw) const { return peek().kind == Tok::Ident && peek().text == kw; }
  ParseError error(const std::string& expected) const {
    const Token& t = peek();
    return ParseError(t.line, t.col, expected);
  }
  void expect(const char* punct) {
    if (!is(punct)) throw error(std::string("'") + punct + "'");
    next();
  }
  Token expect_ident() {
    if (peek().kind != Tok::Ident || is_type_kw()) throw error("identifier");
    return next();
  }
  bool is_type_kw() const { return is_kw("int") || is_kw("char") || is_kw("void"); }

  SourceLoc loc_of(const Token& t, StmtId id) const { return SourceLoc{file_, t.line, t.col, id}; }
  StmtId fresh_id() { return next_id_++; }

  Type parse_base_type() {
    Type t;
    if (is_kw("int")) {
      t.base = BaseType::Int;
    } else if (is_kw("char")) {
      t.base = BaseType::Char;
    } else if (is_kw("void")) {
      t.base = BaseType::Void;
    } else {
      throw error("type");
    }
    next();
    while (is("*")) {
      next();
      ++t.pointer;
    }
    return t;
  }

  std::vector<Param> parse_params() {
    std::vector<Param> params;
    if (is(")")) return params;
    if (is_kw("void") && peek(1).kind == Tok::Punct && peek(1).text == ")") {
      next();
      return params;
    }
    for (;;) {
      Param p;
      p.type = parse_base_type();
      p.name = expect_ident().text;
      if (is("[")) {
        next();
        expect("]");
        ++p.type.pointer;
      }
      params.push_back(p);
      if (!is(",")) break;
      next();
    }
    return params;
  }

  Stmt finish_decl(const Token& start, Type t, const Token& name) {
    Stmt d;
    d.kind = StmtKind::VarDecl;
    d.loc = loc_of(start, fresh_id());
    d.name = name.text;
    if (is("[")) {
      next();
      if (peek().kind != Tok::Int) throw error("constant array size");
      t.array = next().value;
      if (*t.array <= 0) throw error("positive array size");
      expect("]");
    }
    if (t.base == BaseType::Void && t.pointer == 0) throw ParseError(start.line, start.col, "non-void variable type");
    d.type = t;
    if (is("=")) {
      next();
      d.init = parse_expr();
      if (t.is_array() && d.init->kind != ExprKind::StrLit) throw error("string literal initializer for array");
      if (t.is_array() && static_cast<std::int64_t>(d.init->text.size()) + 1 > *t.array) {
        throw error("initializer that fits the array");
      }
    }
    return d;
  }

  Stmt parse_block() {
    Stmt b;
    b.kind = StmtKind::Block;
    b.loc = loc_of(peek(), fresh_id());
    expect("{");
    while (!is("}")) {
      if (peek().kind == Tok::End) throw error("'}' (unbalanced block)");
      b.body.push_back(parse_stmt());
    }
    next();
    return b;
  }

  /// Statement bodies are always blocks; a lone statement gets a synthetic one.
  Stmt parse_body() {
    if (is("{")) return parse_block();
    Stmt b;
    b.kind = StmtKind::Block;
    b.loc = loc_of(peek(), fresh_id());
    b.body.push_back(parse_stmt());
    return b;
  }

  Stmt parse_stmt() {
    Token start = peek();
    if (is("{")) return parse_block();
    if (is_kw("if")) {
      Stmt s;
      s.kind = StmtKind::If;
      s.loc = loc_of(start, fresh_id());
      next();
      expect("(");
      s.value = parse_expr();
      expect(")");
      s.body.push_back(parse_body());
      if (is_kw("else")) {
        next();
        s.has_else = true;
        s.else_body.push_back(parse_body());
      }
      return s;
    }
    if (is_kw("while")) {
      Stmt s;
      s.kind = StmtKind::While;
      s.loc = loc_of(start, fresh_id());
      next();
      expect("(");
      s.value = parse_expr();
      expect(")");
      s.body.push_back(parse_body());
      return s;
    }
    if (is_kw("for")) return parse_for();
    if (is_kw("return")) {
      Stmt s;
      s.kind = StmtKind::Return;
      s.loc = loc_of(start, fresh_id());
      next();
      if (!is(";")) s.init = parse_expr();
      expect(";");
      return s;
    }
    if (is_kw("break") || is_kw("continue")) {
      Stmt s;
      s.kind = is_kw("break") ? StmtKind::Break : StmtKind::Continue;
      s.loc = loc_of(start, fresh_id());
      next();
      expect(";");
      return s;
    }
    if (is_kw("assert")) {
      Stmt s;
      s.kind = StmtKind::Assert;
      s.loc = loc_of(start, fresh_id());
      next();
      expect("(");
      s.value = parse_expr();
      expect(")");
      expect(";");
      return s;
    }
    if (is_type_kw()) {
      Type t = parse_base_type();
      Token name = expect_ident();
      Stmt d = finish_decl(start, t, name);
      expect(";");
      return d;
    }
    Stmt s = parse_simple();
    expect(";");
    return s;
  }

  Stmt parse_simple() {
    Token start = peek();
    Stmt s;
    s.loc = loc_of(start, fresh_id());
    ExprPtr lhs = parse_expr();
    auto as_assign = [&](ExprPtr rhs) {
      if (lhs->kind != ExprKind::Ident && lhs->kind != ExprKind::Index &&
          !(lhs->kind == ExprKind::Unary && lhs->text == "*")) {
        throw ParseError(start.line, start.col, "assignable expression");
      }
      s.kind = StmtKind::Assign;
      s.target = lhs;
      s.value = std::move(rhs);
    };
    if (is("=")) {
      next();
      as_assign(parse_expr());
    } else if (is("+=") || is("-=")) {
      std::string op = next().text.substr(0, 1);
      as_assign(Expr::binary(op, lhs, parse_expr()));
    } else if (is("++") || is("--")) {
      std::string op = next().text.substr(0, 1);
      as_assign(Expr::binary(op, lhs, Expr::int_lit(1)));
    } else {
      s.kind = StmtKind::ExprStmt;
      s.value = lhs;
    }
    return s;
  }

  Stmt parse_for() {
    Token start = next();
    expect("(");
    Stmt outer;
    bool has_init = !is(";");
    if (has_init) {
      outer.kind = StmtKind::Block;
      outer.from_for = true;
      outer.loc = loc_of(start, fresh_id());
      if (is_type_kw()) {
        Token dstart = peek();
        Type t = parse_base_type();
        Token name = expect_ident();
        outer.body.push_back(finish_decl(dstart, t, name));
      } else {
        outer.body.push_back(parse_simple());
      }
    }
    expect(";");
    Stmt loop;
    loop.kind = StmtKind::While;
    loop.loc = loc_of(start, fresh_id());
    loop.value = is(";") ? Expr::int_lit(1) : parse_expr();
    expect(";");
    if (!is(")")) loop.latch.push_back(parse_simple());
    expect(")");
    loop.body.push_back(parse_body());
    if (!has_init) return loop;
    outer.body.push_back(std::move(loop));
    return outer;
  }

  // Expressions, lowest precedence first.
  ExprPtr parse_expr() { return parse_binary(0); }

  static int precedence(const std::string& op) {
    static const std::map<std::string, int> kPrec = {
        {"||", 1}, {"&&", 2}, {"==", 3}, {"!=", 3}, {"<", 4}, {"<=", 4}, {">", 4}, {">=", 4},
        {"+", 5},  {"-", 5},  {"*", 6},  {"/", 6},  {"%", 6}};
    auto it = kPrec.find(op);
    return it == kPrec.end() ? -1 : it->second;
  }

  ExprPtr parse_binary(int min_prec) {
    ExprPtr lhs = parse_unary();
    for (;;) {
      if (peek().kind != Tok::Punct) return lhs;
      int prec = precedence(peek().text);
      if (prec < 0 || prec <= min_prec) return lhs;
      Token op = next();
      ExprPtr rhs = parse_binary(prec);
      auto e = std::make_shared<Expr>(*Expr::binary(op.text, lhs, rhs));
      e->line = lhs->line;
      e->col = lhs->col;
      lhs = e;
    }
  }

  ExprPtr parse_unary() {
    if (is("!") || is("-") || is("*") || is("&")) {
      Token op = next();
      auto e = std::make_shared<Expr>(*Expr::unary(op.text, parse_unary()));
      e->line = op.line;
      e->col = op.col;
      return e;
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    while (is("[")) {
      next();
      auto idx = std::make_shared<Expr>();
      idx->kind = ExprKind::Index;
      idx->args = {e, parse_expr()};
      idx->line = e->line;
      idx->col = e->col;
      expect("]");
      e = idx;
    }
    return e;
  }

  ExprPtr parse_primary() {
    Token t = peek();
    auto e = std::make_shared<Expr>();
    e->line = t.line;
    e->col = t.col;
    switch (t.kind) {
      case Tok::Int:
        next();
        e->kind = ExprKind::IntLit;
        e->value = t.value;
        return e;
      case Tok::Char:
        next();
        e->kind = ExprKind::CharLit;
        e->value = t.value;
        return e;
      case Tok::Str:
        next();
        e->kind = ExprKind::StrLit;
        e->text = t.text;
        return e;
      case Tok::Ident:
        if (is_type_kw()) throw error("expression");
        next();
        if (t.text == "NULL") {
          e->kind = ExprKind::IntLit;
          return e;
        }
        if (is("(")) {
          next();
          e->kind = ExprKind::Call;
          e->text = t.text;
          if (!is(")")) {
            for (;;) {
              e->args.push_back(parse_expr());
              if (!is(",")) break;
              next();
            }
          }
          expect(")");
          return e;
        }
        e->kind = ExprKind::Ident;
        e->text = t.text;
        return e;
      case Tok::Punct:
        if (t.text == "(") {
          next();
          ExprPtr inner = parse_expr();
          expect(")");
          return inner;
        }
        break;
      case Tok::End:
        break;
    }
    throw error("expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::string file_;
  StmtId next_id_;
};

}  // namespace

Program parse(std::string_view source, std::string file) {
  Parser p(Lexer(source).run(), file, 1);
  Program prog = p.program();
  prog.source_text = std::string(source);
  return prog;
}

Stmt parse_statement(std::string_view text, StmtId first_id) {
  Parser p(Lexer(text).run(), "<patch>", first_id);
  return p.single_statement();
}

ExprPtr parse_expression(std::string_view text) {
  Parser p(Lexer(text).run(), "<patch>", 1);
  return p.single_expression();
}

}  // namespace sigforge
