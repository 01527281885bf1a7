#ifndef CUBICON_EXPRESSION_HPP
#define CUBICON_EXPRESSION_HPP

#include <memory>
#include <string>
#include <vector>

namespace cubicon {

// Arithmetic expression over variables x1..xn and lambda, parsed once into
// an evaluation tree.  Supported: + - * / ^ (right associative), unary -,
// parentheses, functions sin cos exp sqrt, numeric literals.
class Expression {
public:
    static Expression parse(const std::string& text, int dim);

    // x points at dim doubles.
    double eval(const double* x, double lambda) const;

    int dim() const { return dim_; }
    const std::string& text() const { return text_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    int dim_ = 0;
    std::string text_;
};

// A vector field given componentwise by expressions: one expression per
// phase-space component, evaluated with variables x1..xn plus lambda.
struct ExpressionField {
    std::vector<Expression> components;

    int dim() const { return static_cast<int>(components.size()); }
    void eval(const double* x, double lambda, double* out) const;

    // Text format: one expression per line; blank lines and lines starting
    // with '#' are ignored.  The number of remaining lines fixes the dimension.
    static ExpressionField parse_file(const std::string& path);
    static ExpressionField parse_text(const std::string& text);
};

} // namespace cubicon

#endif
