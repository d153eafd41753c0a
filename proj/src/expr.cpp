#include "dlab/expr.hpp"

#include "dlab/error.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

namespace dlab {

namespace {

constexpr std::array<std::pair<std::string_view, Func>, 8> kFunctions{{
    {"sin", Func::Sin},
    {"cos", Func::Cos},
    {"exp", Func::Exp},
    {"log", Func::Log},
    {"tanh", Func::Tanh},
    {"atan", Func::Atan},
    {"sqrt", Func::Sqrt},
    {"abs", Func::Abs},
}};

double apply(Func f, double x) {
    switch (f) {
        case Func::Sin: return std::sin(x);
        case Func::Cos: return std::cos(x);
        case Func::Exp: return std::exp(x);
        case Func::Log: return std::log(x);
        case Func::Tanh: return std::tanh(x);
        case Func::Atan: return std::atan(x);
        case Func::Sqrt: return std::sqrt(x);
        case Func::Abs: return std::fabs(x);
    }
    return std::nan("");
}

ExprPtr make_const(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Constant;
    e->value = v;
    return e;
}

ExprPtr make_node(ExprKind kind, std::vector<ExprPtr> children) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->children = std::move(children);
    return e;
}

class Parser {
public:
    Parser(std::string_view text, int max_state, int line, int column)
        : text_(text), max_state_(max_state), line_(line), column_(column) {}

    ExprPtr parse() {
        skip_ws();
        if (pos_ >= text_.size()) fail("empty expression");
        ExprPtr e = expr();
        skip_ws();
        if (pos_ < text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, line_, column_ + static_cast<int>(pos_));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprPtr expr() {
        ExprPtr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make_node(ExprKind::Add, {lhs, term()});
            } else if (accept('-')) {
                lhs = make_node(ExprKind::Sub, {lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    ExprPtr term() {
        ExprPtr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make_node(ExprKind::Mul, {lhs, unary()});
            } else if (accept('/')) {
                lhs = make_node(ExprKind::Div, {lhs, unary()});
            } else {
                return lhs;
            }
        }
    }

    ExprPtr unary() {
        if (accept('-')) return make_node(ExprKind::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    ExprPtr power() {
        ExprPtr base = primary();
        if (accept('^')) return make_node(ExprKind::Pow, {base, unary()});
        return base;
    }

    ExprPtr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            ExprPtr inner = expr();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail(std::string("unexpected '") + c + "'");
    }

    ExprPtr number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                pos_ = look;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string token(text_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) {
            pos_ = start;
            fail("malformed number '" + token + "'");
        }
        return make_const(v);
    }

    ExprPtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view name = text_.substr(start, pos_ - start);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            for (const auto& [fname, f] : kFunctions) {
                if (fname == name) {
                    ++pos_;
                    ExprPtr arg = expr();
                    if (!accept(')')) fail("expected ')' after argument of " + std::string(name));
                    auto e = std::make_shared<Expr>();
                    e->kind = ExprKind::Call;
                    e->func = f;
                    e->children = {arg};
                    return e;
                }
            }
            pos_ = start;
            fail("unknown function '" + std::string(name) + "'");
        }
        if (name == "t") {
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::VarT;
            return e;
        }
        if (name == "pi") return make_const(std::numbers::pi);
        if (name.size() >= 2 && name[0] == 'y') {
            int k = 0;
            const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
            if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1) {
                if (k > max_state_) {
                    pos_ = start;
                    fail("state variable '" + std::string(name) + "' is not available here");
                }
                auto e = std::make_shared<Expr>();
                e->kind = ExprKind::VarY;
                e->index = k;
                return e;
            }
        }
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int max_state_;
    int line_;
    int column_;
};

}  // namespace

std::string_view func_name(Func f) {
    for (const auto& [name, g] : kFunctions) {
        if (g == f) return name;
    }
    return "?";
}

double Expr::eval(double t, const double* y) const {
    switch (kind) {
        case ExprKind::Constant: return value;
        case ExprKind::VarT: return t;
        case ExprKind::VarY: return y[index - 1];
        case ExprKind::Neg: return -children[0]->eval(t, y);
        case ExprKind::Add: return children[0]->eval(t, y) + children[1]->eval(t, y);
        case ExprKind::Sub: return children[0]->eval(t, y) - children[1]->eval(t, y);
        case ExprKind::Mul: return children[0]->eval(t, y) * children[1]->eval(t, y);
        case ExprKind::Div: return children[0]->eval(t, y) / children[1]->eval(t, y);
        case ExprKind::Pow: {
            const double base = children[0]->eval(t, y);
            const ExprPtr& ex = children[1];
            // small integer exponents are common (cos(t)^2) and pow() is slow
            if (ex->kind == ExprKind::Constant && ex->value == 2.0) return base * base;
            return std::pow(base, ex->eval(t, y));
        }
        case ExprKind::Call: return apply(func, children[0]->eval(t, y));
    }
    return std::nan("");
}

std::string Expr::to_string() const {
    switch (kind) {
        case ExprKind::Constant: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", value);
            return buf;
        }
        case ExprKind::VarT: return "t";
        case ExprKind::VarY: return "y" + std::to_string(index);
        case ExprKind::Neg: return "(-" + children[0]->to_string() + ")";
        case ExprKind::Add: return "(" + children[0]->to_string() + " + " + children[1]->to_string() + ")";
        case ExprKind::Sub: return "(" + children[0]->to_string() + " - " + children[1]->to_string() + ")";
        case ExprKind::Mul: return "(" + children[0]->to_string() + " * " + children[1]->to_string() + ")";
        case ExprKind::Div: return "(" + children[0]->to_string() + " / " + children[1]->to_string() + ")";
        case ExprKind::Pow: return "(" + children[0]->to_string() + " ^ " + children[1]->to_string() + ")";
        case ExprKind::Call: return std::string(func_name(func)) + "(" + children[0]->to_string() + ")";
    }
    return "?";
}

bool Expr::uses_t() const {
    if (kind == ExprKind::VarT) return true;
    for (const auto& c : children) {
        if (c->uses_t()) return true;
    }
    return false;
}

int Expr::max_state_index() const {
    int k = kind == ExprKind::VarY ? index : 0;
    for (const auto& c : children) k = std::max(k, c->max_state_index());
    return k;
}

bool operator==(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
    switch (a.kind) {
        case ExprKind::Constant:
            if (a.value != b.value) return false;
            break;
        case ExprKind::VarY:
            if (a.index != b.index) return false;
            break;
        case ExprKind::Call:
            if (a.func != b.func) return false;
            break;
        default: break;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!(*a.children[i] == *b.children[i])) return false;
    }
    return true;
}

ExprPtr parse_expression(std::string_view text, int max_state, int line, int column) {
    return Parser(text, max_state, line, column).parse();
}

}  // namespace dlab
