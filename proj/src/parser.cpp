#include "sdesym/expr.hpp"

#include <cctype>

namespace sdesym {

namespace {

// Recursive-descent parser for
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ['-'] atom ['^' factor]
//   atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
class Parser {
public:
    Parser(const std::string& text, const std::set<std::string>& names)
        : text_(text), names_(names)
    {
    }

    Expr run()
    {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool peek(char c)
    {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool accept(char c)
    {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c))
            fail(std::string("expected '") + c + "'");
    }

    Expr parse_expr()
    {
        Expr acc = parse_term();
        for (;;) {
            if (accept('+')) {
                acc = make_add({acc, parse_term()});
            } else if (accept('-')) {
                acc = make_add({acc, make_mul({make_num(-1), parse_term()})});
            } else {
                return acc;
            }
        }
    }

    Expr parse_term()
    {
        Expr acc = parse_factor();
        for (;;) {
            if (accept('*')) {
                acc = make_mul({acc, parse_factor()});
            } else if (accept('/')) {
                acc = make_mul({acc, make_pow(parse_factor(), make_num(-1))});
            } else {
                return acc;
            }
        }
    }

    Expr parse_factor()
    {
        skip_ws();
        bool negate = accept('-');
        Expr a = parse_atom();
        if (accept('^'))
            a = make_pow(a, parse_factor()); // '^' is right-associative
        if (negate)
            a = make_mul({make_num(-1), a});
        return a;
    }

    Expr parse_atom()
    {
        skip_ws();
        if (pos_ >= text_.size())
            fail("unexpected end of input");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)))
            return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return parse_identifier();
        fail("unexpected character");
    }

    Expr parse_number()
    {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        BigInt intpart(text_.substr(start, pos_ - start));
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            std::size_t frac_start = pos_;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == frac_start)
                fail("expected digits after decimal point");
            std::string frac = text_.substr(frac_start, pos_ - frac_start);
            BigInt num = intpart;
            BigInt den = 1;
            for (char d : frac) {
                num = num * 10 + (d - '0');
                den *= 10;
            }
            return make_num(Rat(num, den)); // decimals become exact rationals
        }
        return make_num(Rat(intpart));
    }

    Expr parse_identifier()
    {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (peek('(')) {
            FunKind fn;
            bool sqrt = false;
            if (name == "exp") {
                fn = FunKind::Exp;
            } else if (name == "log") {
                fn = FunKind::Log;
            } else if (name == "sin") {
                fn = FunKind::Sin;
            } else if (name == "cos") {
                fn = FunKind::Cos;
            } else if (name == "sqrt") {
                sqrt = true;
                fn = FunKind::Exp; // unused
            } else {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            expect('(');
            Expr arg = parse_expr();
            expect(')');
            if (sqrt)
                return make_pow(arg, make_num(Rat(1, 2)));
            return make_fun(fn, arg);
        }
        if (!names_.count(name)) {
            pos_ = start;
            fail("unknown identifier '" + name + "'");
        }
        return make_sym(name);
    }

    const std::string& text_;
    const std::set<std::string>& names_;
    std::size_t pos_ = 0;
};

} // namespace

Expr parse_with_names(const std::string& text, const std::set<std::string>& names)
{
    return Parser(text, names).run();
}

Expr parse(const std::string& text, const SymbolTable& symbols)
{
    auto names = symbols.all_names();
    return parse_with_names(text, std::set<std::string>(names.begin(), names.end()));
}

} // namespace sdesym
