#include "cubicon/expression.hpp"
#include "cubicon/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cubicon {

struct Expression::Node {
    enum class Op { Const, Var, Lambda, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt };
    Op op = Op::Const;
    double value = 0.0; // Const
    int var = 0;        // Var: 0-based component index
    std::shared_ptr<const Node> a, b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

class Parser {
public:
    Parser(const std::string& s, int dim) : s_(s), dim_(dim) {}

    NodePtr run() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != s_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    const std::string& s_;
    int dim_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression: " + msg + " at offset " + std::to_string(pos_) +
                         " in \"" + s_ + "\"");
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    // expr   := term (('+'|'-') term)*
    // term   := factor (('*'|'/') factor)*
    // factor := unary ('^' factor)?          right associative
    // unary  := '-' unary | primary
    // primary:= number | ident | ident '(' expr ')' | '(' expr ')'
    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (eat('+')) { Node n; n.op = Node::Op::Add; n.a = lhs; n.b = term(); lhs = make(std::move(n)); }
            else if (eat('-')) { Node n; n.op = Node::Op::Sub; n.a = lhs; n.b = term(); lhs = make(std::move(n)); }
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            if (eat('*')) { Node n; n.op = Node::Op::Mul; n.a = lhs; n.b = factor(); lhs = make(std::move(n)); }
            else if (eat('/')) { Node n; n.op = Node::Op::Div; n.a = lhs; n.b = factor(); lhs = make(std::move(n)); }
            else return lhs;
        }
    }

    NodePtr factor() {
        NodePtr base = unary();
        if (eat('^')) {
            Node n; n.op = Node::Op::Pow; n.a = base; n.b = factor();
            return make(std::move(n));
        }
        return base;
    }

    NodePtr unary() {
        if (eat('-')) {
            Node n; n.op = Node::Op::Neg; n.a = unary();
            return make(std::move(n));
        }
        return primary();
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident();
        if (eat('(')) {
            NodePtr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr number() {
        size_t start = pos_;
        const char* begin = s_.c_str() + start;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos_ = start + static_cast<size_t>(end - begin);
        Node n; n.op = Node::Op::Const; n.value = v;
        return make(std::move(n));
    }

    NodePtr ident() {
        size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string name = s_.substr(start, pos_ - start);
        if (name == "lambda") { Node n; n.op = Node::Op::Lambda; return make(std::move(n)); }
        if (name == "pi") { Node n; n.op = Node::Op::Const; n.value = 3.14159265358979323846; return make(std::move(n)); }
        if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt") {
            if (!eat('(')) fail("expected '(' after " + name);
            NodePtr arg = expr();
            if (!eat(')')) fail("expected ')'");
            Node n;
            n.op = name == "sin" ? Node::Op::Sin
                 : name == "cos" ? Node::Op::Cos
                 : name == "exp" ? Node::Op::Exp
                                 : Node::Op::Sqrt;
            n.a = arg;
            return make(std::move(n));
        }
        if (name.size() >= 2 && name[0] == 'x') {
            char* end = nullptr;
            long idx = std::strtol(name.c_str() + 1, &end, 10);
            if (*end == '\0' && idx >= 1) {
                if (idx > dim_)
                    fail("variable " + name + " exceeds dimension " + std::to_string(dim_));
                Node n; n.op = Node::Op::Var; n.var = static_cast<int>(idx - 1);
                return make(std::move(n));
            }
        }
        fail("unknown identifier '" + name + "'");
    }
};

double eval_node(const Node& n, const double* x, double lambda) {
    using Op = Node::Op;
    switch (n.op) {
        case Op::Const:  return n.value;
        case Op::Var:    return x[n.var];
        case Op::Lambda: return lambda;
        case Op::Add:    return eval_node(*n.a, x, lambda) + eval_node(*n.b, x, lambda);
        case Op::Sub:    return eval_node(*n.a, x, lambda) - eval_node(*n.b, x, lambda);
        case Op::Mul:    return eval_node(*n.a, x, lambda) * eval_node(*n.b, x, lambda);
        case Op::Div:    return eval_node(*n.a, x, lambda) / eval_node(*n.b, x, lambda);
        case Op::Pow:    return std::pow(eval_node(*n.a, x, lambda), eval_node(*n.b, x, lambda));
        case Op::Neg:    return -eval_node(*n.a, x, lambda);
        case Op::Sin:    return std::sin(eval_node(*n.a, x, lambda));
        case Op::Cos:    return std::cos(eval_node(*n.a, x, lambda));
        case Op::Exp:    return std::exp(eval_node(*n.a, x, lambda));
        case Op::Sqrt:   return std::sqrt(eval_node(*n.a, x, lambda));
    }
    return 0.0;
}

} // namespace

Expression Expression::parse(const std::string& text, int dim) {
    Expression e;
    e.root_ = Parser(text, dim).run();
    e.dim_ = dim;
    e.text_ = text;
    return e;
}

double Expression::eval(const double* x, double lambda) const {
    return eval_node(*root_, x, lambda);
}

void ExpressionField::eval(const double* x, double lambda, double* out) const {
    for (size_t i = 0; i < components.size(); ++i)
        out[i] = components[i].eval(x, lambda);
}

ExpressionField ExpressionField::parse_text(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        if (line[a] == '#') continue;
        size_t b = line.find_last_not_of(" \t\r");
        lines.push_back(line.substr(a, b - a + 1));
    }
    if (lines.empty())
        throw ParseError("vector field text contains no expressions");
    int dim = static_cast<int>(lines.size());
    ExpressionField f;
    for (const std::string& l : lines)
        f.components.push_back(Expression::parse(l, dim));
    return f;
}

ExpressionField ExpressionField::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open vector field file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

} // namespace cubicon
