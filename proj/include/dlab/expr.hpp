#pragma once

// Infix expressions over t and the state variables y1..yn.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | 't' | 'y'<k> | name '(' expr ')' | '(' expr ')'
//
// '^' is right associative and binds tighter than unary minus, so -t^2 is
// -(t^2). There is no implicit multiplication.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace dlab {

enum class ExprKind { Constant, VarT, VarY, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Func { Sin, Cos, Exp, Log, Tanh, Atan, Sqrt, Abs };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind = ExprKind::Constant;
    double value = 0.0;      // Constant
    int index = 0;           // VarY, 1-based
    Func func = Func::Sin;   // Call
    std::vector<ExprPtr> children;

    double eval(double t, const double* y = nullptr) const;

    /// Fully parenthesized text that parses back to an identical tree.
    std::string to_string() const;

    bool uses_t() const;
    int max_state_index() const;
};

bool operator==(const Expr& a, const Expr& b);

std::string_view func_name(Func f);

/// Parses `text`; `max_state` is the largest admissible k in y<k> (0 forbids
/// state variables). `line` and `column` locate `text` inside a larger
/// document so that ParseError positions refer to the original file.
ExprPtr parse_expression(std::string_view text, int max_state = 0, int line = 1, int column = 1);

}  // namespace dlab
