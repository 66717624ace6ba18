#include "recoverl/dsl.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace recoverl::dsl {

namespace {

std::string pos_str(SourcePos p) { return "line " + std::to_string(p.line) + " col " + std::to_string(p.col); }

} // namespace

ParseError::ParseError(SourcePos p, const std::string& msg) : std::runtime_error(pos_str(p) + ": " + msg), pos(p) {}

EvalError::EvalError(SourcePos p, const std::string& msg) : std::runtime_error(pos_str(p) + ": " + msg), pos(p) {}

ValidationFailure::ValidationFailure(std::vector<ValidationIssue> is)
    : std::runtime_error(is.empty() ? std::string("program invalid")
                                    : pos_str(is.front().pos) + ": " + is.front().message),
      issues(std::move(is)) {}

// ---------------------------------------------------------------- lexing

namespace {

enum class Tok {
    number, ident, kw_let, kw_return, kw_if, kw_and, kw_or, kw_not,
    assign, semi, comma, lparen, rparen,
    plus, minus, star, slash,
    lt, le, gt, ge, eq,
    end,
};

struct Token {
    Tok kind;
    SourcePos pos;
    double number = 0.0;
    std::string text{};
};

struct Lexer {
    std::string_view src;
    std::size_t i = 0;
    int line = 1, col = 1;

    SourcePos here() const { return {line, col}; }

    int peek() const { return i < src.size() ? (unsigned char)src[i] : -1; }

    int get() {
        if (i >= src.size())
            return -1;
        int c = (unsigned char)src[i++];
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    }

    void skip_ws() {
        for (;;) {
            int c = peek();
            if (c == '#') {
                while (peek() != -1 && peek() != '\n')
                    get();
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                get();
                continue;
            }
            return;
        }
    }

    Token next() {
        skip_ws();
        SourcePos p = here();
        int c = peek();
        if (c == -1)
            return {Tok::end, p};

        if (std::isdigit(c)) {
            std::size_t start = i;
            while (std::isdigit(peek()))
                get();
            if (peek() == '.') {
                get();
                if (!std::isdigit(peek()))
                    throw ParseError(here(), "expected digits after decimal point");
                while (std::isdigit(peek()))
                    get();
            }
            if (peek() == 'e' || peek() == 'E') {
                get();
                if (peek() == '+' || peek() == '-')
                    get();
                if (!std::isdigit(peek()))
                    throw ParseError(here(), "expected digits in exponent");
                while (std::isdigit(peek()))
                    get();
            }
            std::string text(src.substr(start, i - start));
            double v = std::strtod(text.c_str(), nullptr);
            if (!std::isfinite(v))
                throw ParseError(p, "number literal out of range");
            return {Tok::number, p, v, text};
        }

        if (std::isalpha(c) || c == '_') {
            std::size_t start = i;
            while (std::isalnum(peek()) || peek() == '_')
                get();
            std::string text(src.substr(start, i - start));
            if (text == "let")
                return {Tok::kw_let, p};
            if (text == "return")
                return {Tok::kw_return, p};
            if (text == "if")
                return {Tok::kw_if, p};
            if (text == "and")
                return {Tok::kw_and, p};
            if (text == "or")
                return {Tok::kw_or, p};
            if (text == "not")
                return {Tok::kw_not, p};
            return {Tok::ident, p, 0.0, text};
        }

        get();
        switch (c) {
        case ';': return {Tok::semi, p};
        case ',': return {Tok::comma, p};
        case '(': return {Tok::lparen, p};
        case ')': return {Tok::rparen, p};
        case '+': return {Tok::plus, p};
        case '-': return {Tok::minus, p};
        case '*': return {Tok::star, p};
        case '/': return {Tok::slash, p};
        case '=':
            if (peek() == '=') {
                get();
                return {Tok::eq, p};
            }
            return {Tok::assign, p};
        case '<':
            if (peek() == '=') {
                get();
                return {Tok::le, p};
            }
            return {Tok::lt, p};
        case '>':
            if (peek() == '=') {
                get();
                return {Tok::ge, p};
            }
            return {Tok::gt, p};
        default:
            throw ParseError(p, std::string("unexpected character '") + char(c) + "'");
        }
    }
};

// ---------------------------------------------------------------- parsing

struct Parser {
    Lexer lex;
    Token cur;

    explicit Parser(std::string_view src) : lex{src} { cur = lex.next(); }

    void advance() { cur = lex.next(); }

    void expect(Tok k, const char* what) {
        if (cur.kind != k)
            throw ParseError(cur.pos, std::string("expected ") + what);
        advance();
    }

    Expr parse_expr() { return parse_or(); }

    Expr parse_or() {
        Expr e = parse_and();
        while (cur.kind == Tok::kw_or) {
            SourcePos p = cur.pos;
            advance();
            Expr rhs = parse_and();
            Expr node;
            node.kind = Expr::Kind::binary;
            node.bin = BinOp::logic_or;
            node.pos = p;
            node.args.push_back(std::move(e));
            node.args.push_back(std::move(rhs));
            e = std::move(node);
        }
        return e;
    }

    Expr parse_and() {
        Expr e = parse_cmp();
        while (cur.kind == Tok::kw_and) {
            SourcePos p = cur.pos;
            advance();
            Expr rhs = parse_cmp();
            Expr node;
            node.kind = Expr::Kind::binary;
            node.bin = BinOp::logic_and;
            node.pos = p;
            node.args.push_back(std::move(e));
            node.args.push_back(std::move(rhs));
            e = std::move(node);
        }
        return e;
    }

    Expr parse_cmp() {
        Expr e = parse_add();
        for (;;) {
            BinOp op;
            switch (cur.kind) {
            case Tok::lt: op = BinOp::lt; break;
            case Tok::le: op = BinOp::le; break;
            case Tok::gt: op = BinOp::gt; break;
            case Tok::ge: op = BinOp::ge; break;
            case Tok::eq: op = BinOp::eq; break;
            default: return e;
            }
            SourcePos p = cur.pos;
            advance();
            Expr rhs = parse_add();
            Expr node;
            node.kind = Expr::Kind::binary;
            node.bin = op;
            node.pos = p;
            node.args.push_back(std::move(e));
            node.args.push_back(std::move(rhs));
            e = std::move(node);
        }
    }

    Expr parse_add() {
        Expr e = parse_mul();
        for (;;) {
            BinOp op;
            if (cur.kind == Tok::plus)
                op = BinOp::add;
            else if (cur.kind == Tok::minus)
                op = BinOp::sub;
            else
                return e;
            SourcePos p = cur.pos;
            advance();
            Expr rhs = parse_mul();
            Expr node;
            node.kind = Expr::Kind::binary;
            node.bin = op;
            node.pos = p;
            node.args.push_back(std::move(e));
            node.args.push_back(std::move(rhs));
            e = std::move(node);
        }
    }

    Expr parse_mul() {
        Expr e = parse_unary();
        for (;;) {
            BinOp op;
            if (cur.kind == Tok::star)
                op = BinOp::mul;
            else if (cur.kind == Tok::slash)
                op = BinOp::div;
            else
                return e;
            SourcePos p = cur.pos;
            advance();
            Expr rhs = parse_unary();
            Expr node;
            node.kind = Expr::Kind::binary;
            node.bin = op;
            node.pos = p;
            node.args.push_back(std::move(e));
            node.args.push_back(std::move(rhs));
            e = std::move(node);
        }
    }

    Expr parse_unary() {
        if (cur.kind == Tok::minus || cur.kind == Tok::kw_not) {
            Expr node;
            node.kind = Expr::Kind::unary;
            node.un = cur.kind == Tok::minus ? UnOp::neg : UnOp::logic_not;
            node.pos = cur.pos;
            advance();
            node.args.push_back(parse_unary());
            return node;
        }
        return parse_primary();
    }

    Expr parse_primary() {
        SourcePos p = cur.pos;
        if (cur.kind == Tok::number) {
            Expr e;
            e.kind = Expr::Kind::number;
            e.number = cur.number;
            e.pos = p;
            advance();
            return e;
        }
        if (cur.kind == Tok::lparen) {
            advance();
            Expr e = parse_expr();
            expect(Tok::rparen, "')'");
            return e;
        }
        if (cur.kind == Tok::kw_if) {
            advance();
            expect(Tok::lparen, "'(' after if");
            Expr e;
            e.kind = Expr::Kind::cond;
            e.pos = p;
            e.args.push_back(parse_expr());
            expect(Tok::comma, "','");
            e.args.push_back(parse_expr());
            expect(Tok::comma, "','");
            e.args.push_back(parse_expr());
            expect(Tok::rparen, "')'");
            return e;
        }
        if (cur.kind == Tok::ident) {
            std::string name = cur.text;
            advance();
            if (cur.kind == Tok::lparen) {
                SourcePos call_open = cur.pos;
                advance();
                Expr e;
                e.kind = Expr::Kind::call;
                e.name = std::move(name);
                e.pos = p;
                if (cur.kind == Tok::end)
                    throw ParseError(call_open, "unclosed call argument list");
                if (cur.kind == Tok::rparen)
                    throw ParseError(cur.pos, "call needs at least one argument");
                e.args.push_back(parse_expr());
                while (cur.kind == Tok::comma) {
                    advance();
                    e.args.push_back(parse_expr());
                }
                if (cur.kind != Tok::rparen)
                    throw ParseError(call_open, "unclosed call argument list");
                advance();
                return e;
            }
            Expr e;
            e.kind = Expr::Kind::ident;
            e.name = std::move(name);
            e.pos = p;
            return e;
        }
        throw ParseError(p, "expected an expression");
    }

    Program parse_program(ProgramKind kind) {
        Program prog;
        prog.kind = kind;
        while (cur.kind == Tok::kw_let) {
            advance();
            if (cur.kind != Tok::ident)
                throw ParseError(cur.pos, "expected a name after 'let'");
            Binding b;
            b.name = cur.text;
            b.pos = cur.pos;
            advance();
            expect(Tok::assign, "'='");
            b.value = parse_expr();
            expect(Tok::semi, "';'");
            prog.bindings.push_back(std::move(b));
        }
        if (cur.kind != Tok::kw_return)
            throw ParseError(cur.pos, "expected 'let' or 'return'");
        advance();
        prog.result = parse_expr();
        expect(Tok::semi, "';'");
        if (cur.kind != Tok::end)
            throw ParseError(cur.pos, "unexpected text after the return statement");
        return prog;
    }
};

} // namespace

Program parse(std::string_view source, ProgramKind kind) {
    Parser p(source);
    return p.parse_program(kind);
}

// ---------------------------------------------------------------- printing

namespace {

void print_expr(std::string& out, const Expr& e) {
    char buf[64];
    switch (e.kind) {
    case Expr::Kind::number:
        // the lexer has no signed literals, so a negative value must print in
        // negation form to survive a reparse unchanged
        if (std::signbit(e.number)) {
            std::snprintf(buf, sizeof buf, "(-%.17g)", -e.number);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", e.number);
        }
        out += buf;
        break;
    case Expr::Kind::ident:
        out += e.name;
        break;
    case Expr::Kind::unary:
        out += e.un == UnOp::neg ? "(-" : "(not ";
        print_expr(out, e.args[0]);
        out += ')';
        break;
    case Expr::Kind::binary: {
        const char* op = nullptr;
        switch (e.bin) {
        case BinOp::add: op = " + "; break;
        case BinOp::sub: op = " - "; break;
        case BinOp::mul: op = " * "; break;
        case BinOp::div: op = " / "; break;
        case BinOp::lt: op = " < "; break;
        case BinOp::le: op = " <= "; break;
        case BinOp::gt: op = " > "; break;
        case BinOp::ge: op = " >= "; break;
        case BinOp::eq: op = " == "; break;
        case BinOp::logic_and: op = " and "; break;
        case BinOp::logic_or: op = " or "; break;
        }
        out += '(';
        print_expr(out, e.args[0]);
        out += op;
        print_expr(out, e.args[1]);
        out += ')';
        break;
    }
    case Expr::Kind::call:
        out += e.name;
        out += '(';
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            if (i)
                out += ", ";
            print_expr(out, e.args[i]);
        }
        out += ')';
        break;
    case Expr::Kind::cond:
        out += "if(";
        print_expr(out, e.args[0]);
        out += ", ";
        print_expr(out, e.args[1]);
        out += ", ";
        print_expr(out, e.args[2]);
        out += ')';
        break;
    }
}

} // namespace

std::string print(const Program& p) {
    std::string out;
    for (const Binding& b : p.bindings) {
        out += "let " + b.name + " = ";
        print_expr(out, b.value);
        out += ";\n";
    }
    out += "return ";
    print_expr(out, p.result);
    out += ";\n";
    return out;
}

bool equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size())
        return false;
    switch (a.kind) {
    case Expr::Kind::number:
        // bit compare, so -0.0 and 0.0 and any nan patterns stay distinct
        if (std::memcmp(&a.number, &b.number, sizeof(double)) != 0)
            return false;
        break;
    case Expr::Kind::ident:
    case Expr::Kind::call:
        if (a.name != b.name)
            return false;
        break;
    case Expr::Kind::unary:
        if (a.un != b.un)
            return false;
        break;
    case Expr::Kind::binary:
        if (a.bin != b.bin)
            return false;
        break;
    case Expr::Kind::cond:
        break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!equal(a.args[i], b.args[i]))
            return false;
    return true;
}

bool equal(const Program& a, const Program& b) {
    if (a.kind != b.kind || a.bindings.size() != b.bindings.size())
        return false;
    for (std::size_t i = 0; i < a.bindings.size(); ++i)
        if (a.bindings[i].name != b.bindings[i].name || !equal(a.bindings[i].value, b.bindings[i].value))
            return false;
    return equal(a.result, b.result);
}

// ---------------------------------------------------------------- validation

namespace {

const std::unordered_map<std::string, std::pair<Builtin, int>>& builtin_table() {
    static const std::unordered_map<std::string, std::pair<Builtin, int>> t = {
        {"abs", {Builtin::abs, 1}},   {"min", {Builtin::min, 2}},  {"max", {Builtin::max, 2}},
        {"exp", {Builtin::exp, 1}},   {"log", {Builtin::log, 1}},  {"sqrt", {Builtin::sqrt, 1}},
        {"tanh", {Builtin::tanh, 1}}, {"sin", {Builtin::sin, 1}},  {"cos", {Builtin::cos, 1}},
        {"clip", {Builtin::clip, 3}}, {"sq", {Builtin::sq, 1}},
    };
    return t;
}

struct Scope {
    const FieldSchema& view;
    const FieldSchema* actions;
    std::unordered_map<std::string, int> locals;  // binding name -> slot
};

void check_expr(const Expr& e, const Scope& sc, ProgramKind kind, std::vector<ValidationIssue>& issues) {
    switch (e.kind) {
    case Expr::Kind::number:
        break;
    case Expr::Kind::ident: {
        if (sc.locals.count(e.name) || sc.view.index_of(e.name) >= 0)
            break;
        if (sc.actions && sc.actions->index_of(e.name) >= 0) {
            if (kind == ProgramKind::eval)
                issues.push_back({e.pos, "eval programs may not read action '" + e.name + "'"});
            break;
        }
        issues.push_back({e.pos, "unknown identifier '" + e.name + "'"});
        break;
    }
    case Expr::Kind::unary:
        check_expr(e.args[0], sc, kind, issues);
        break;
    case Expr::Kind::binary:
        check_expr(e.args[0], sc, kind, issues);
        check_expr(e.args[1], sc, kind, issues);
        break;
    case Expr::Kind::call: {
        auto it = builtin_table().find(e.name);
        if (it == builtin_table().end()) {
            issues.push_back({e.pos, "unknown function '" + e.name + "'"});
        } else if (int(e.args.size()) != it->second.second) {
            issues.push_back({e.pos, "'" + e.name + "' takes " + std::to_string(it->second.second) +
                                         " argument(s), got " + std::to_string(e.args.size())});
        }
        for (const Expr& a : e.args)
            check_expr(a, sc, kind, issues);
        break;
    }
    case Expr::Kind::cond:
        for (const Expr& a : e.args)
            check_expr(a, sc, kind, issues);
        break;
    }
}

// Shapes whose value is guaranteed to be exactly 0.0 or 1.0: comparisons and
// logical operators (they emit 0/1 by definition), literal 0 or 1, if() whose
// branches are such shapes, and references to bindings holding one.
bool is_01_shape(const Expr& e, const std::unordered_map<std::string, const Expr*>& bindings) {
    switch (e.kind) {
    case Expr::Kind::number:
        return e.number == 0.0 || e.number == 1.0;
    case Expr::Kind::ident: {
        auto it = bindings.find(e.name);
        return it != bindings.end() && is_01_shape(*it->second, bindings);
    }
    case Expr::Kind::unary:
        return e.un == UnOp::logic_not;
    case Expr::Kind::binary:
        switch (e.bin) {
        case BinOp::lt:
        case BinOp::le:
        case BinOp::gt:
        case BinOp::ge:
        case BinOp::eq:
        case BinOp::logic_and:
        case BinOp::logic_or:
            return true;
        default:
            return false;
        }
    case Expr::Kind::cond:
        return is_01_shape(e.args[1], bindings) && is_01_shape(e.args[2], bindings);
    case Expr::Kind::call:
        return false;
    }
    return false;
}

} // namespace

std::vector<ValidationIssue> validate(const Program& p, const FieldSchema& view, const FieldSchema* actions) {
    std::vector<ValidationIssue> issues;
    // action fields stay visible to eval programs so reads of them get the
    // dedicated "may not read" message instead of "unknown identifier"
    Scope sc{view, actions, {}};

    std::unordered_map<std::string, const Expr*> binding_exprs;
    for (const Binding& b : p.bindings) {
        if (builtin_table().count(b.name)) {
            issues.push_back({b.pos, "'" + b.name + "' is a function name and cannot be bound"});
        } else if (sc.locals.count(b.name)) {
            issues.push_back({b.pos, "'" + b.name + "' is already bound"});
        } else if (view.index_of(b.name) >= 0 || (actions && actions->index_of(b.name) >= 0)) {
            issues.push_back({b.pos, "'" + b.name + "' shadows an input field"});
        }
        check_expr(b.value, sc, p.kind, issues);
        sc.locals.emplace(b.name, int(sc.locals.size()));
        binding_exprs.emplace(b.name, &b.value);
    }
    check_expr(p.result, sc, p.kind, issues);

    if (p.kind == ProgramKind::eval && issues.empty() && !is_01_shape(p.result, binding_exprs))
        issues.push_back({p.result.pos, "eval programs must return a 0/1-valued expression "
                                        "(a comparison, logical expression, or if() with 0/1 branches)"});
    return issues;
}

// ---------------------------------------------------------------- compile

namespace {

struct Compiler {
    const FieldSchema& view;
    const FieldSchema* actions;
    std::unordered_map<std::string, int> locals;
    std::vector<CompiledProgram::Instr> code;

    using Op = CompiledProgram::Op;

    void emit(Op op, std::int32_t arg, double value, SourcePos pos) { code.push_back({op, arg, value, pos}); }

    int emit_jump(Op op, SourcePos pos) {
        emit(op, -1, 0.0, pos);
        return int(code.size()) - 1;
    }

    void patch(int at) { code[std::size_t(at)].arg = std::int32_t(code.size()); }

    void compile_expr(const Expr& e) {
        switch (e.kind) {
        case Expr::Kind::number:
            emit(Op::push_const, 0, e.number, e.pos);
            break;
        case Expr::Kind::ident: {
            auto it = locals.find(e.name);
            if (it != locals.end()) {
                emit(Op::load_local, it->second, 0.0, e.pos);
                break;
            }
            int vi = view.index_of(e.name);
            if (vi >= 0) {
                emit(Op::load_view, vi, 0.0, e.pos);
                break;
            }
            emit(Op::load_action, actions->index_of(e.name), 0.0, e.pos);
            break;
        }
        case Expr::Kind::unary:
            compile_expr(e.args[0]);
            emit(e.un == UnOp::neg ? Op::neg : Op::logic_not, 0, 0.0, e.pos);
            break;
        case Expr::Kind::binary:
            switch (e.bin) {
            case BinOp::logic_and: {
                compile_expr(e.args[0]);
                int j1 = emit_jump(Op::jump_if_zero, e.pos);
                compile_expr(e.args[1]);
                int j2 = emit_jump(Op::jump_if_zero, e.pos);
                emit(Op::push_const, 0, 1.0, e.pos);
                int jend = emit_jump(Op::jump, e.pos);
                patch(j1);
                patch(j2);
                emit(Op::push_const, 0, 0.0, e.pos);
                patch(jend);
                break;
            }
            case BinOp::logic_or: {
                compile_expr(e.args[0]);
                int j1 = emit_jump(Op::jump_if_nonzero, e.pos);
                compile_expr(e.args[1]);
                int j2 = emit_jump(Op::jump_if_nonzero, e.pos);
                emit(Op::push_const, 0, 0.0, e.pos);
                int jend = emit_jump(Op::jump, e.pos);
                patch(j1);
                patch(j2);
                emit(Op::push_const, 0, 1.0, e.pos);
                patch(jend);
                break;
            }
            default: {
                compile_expr(e.args[0]);
                compile_expr(e.args[1]);
                Op op = Op::add;
                switch (e.bin) {
                case BinOp::add: op = Op::add; break;
                case BinOp::sub: op = Op::sub; break;
                case BinOp::mul: op = Op::mul; break;
                case BinOp::div: op = Op::div; break;
                case BinOp::lt: op = Op::lt; break;
                case BinOp::le: op = Op::le; break;
                case BinOp::gt: op = Op::gt; break;
                case BinOp::ge: op = Op::ge; break;
                default: op = Op::eq; break;
                }
                emit(op, 0, 0.0, e.pos);
                break;
            }
            }
            break;
        case Expr::Kind::call: {
            for (const Expr& a : e.args)
                compile_expr(a);
            Op op = Op::call_abs;
            switch (builtin_table().at(e.name).first) {
            case Builtin::abs: op = Op::call_abs; break;
            case Builtin::min: op = Op::call_min; break;
            case Builtin::max: op = Op::call_max; break;
            case Builtin::exp: op = Op::call_exp; break;
            case Builtin::log: op = Op::call_log; break;
            case Builtin::sqrt: op = Op::call_sqrt; break;
            case Builtin::tanh: op = Op::call_tanh; break;
            case Builtin::sin: op = Op::call_sin; break;
            case Builtin::cos: op = Op::call_cos; break;
            case Builtin::clip: op = Op::call_clip; break;
            case Builtin::sq: op = Op::call_sq; break;
            }
            emit(op, 0, 0.0, e.pos);
            break;
        }
        case Expr::Kind::cond: {
            compile_expr(e.args[0]);
            int jelse = emit_jump(Op::jump_if_zero, e.pos);
            compile_expr(e.args[1]);
            int jend = emit_jump(Op::jump, e.pos);
            patch(jelse);
            compile_expr(e.args[2]);
            patch(jend);
            break;
        }
        }
    }
};

} // namespace

CompiledProgram compile(const Program& p, const FieldSchema& view, const FieldSchema* actions) {
    std::vector<ValidationIssue> issues = validate(p, view, actions);
    if (!issues.empty())
        throw ValidationFailure(std::move(issues));

    Compiler c{view, actions, {}, {}};
    for (const Binding& b : p.bindings) {
        c.compile_expr(b.value);
        int slot = int(c.locals.size());
        c.locals.emplace(b.name, slot);
        c.emit(CompiledProgram::Op::store_local, slot, 0.0, b.pos);
    }
    c.compile_expr(p.result);

    CompiledProgram out;
    out.kind_ = p.kind;
    out.code_ = std::move(c.code);
    out.n_locals_ = int(c.locals.size());
    return out;
}

// ---------------------------------------------------------------- eval

double CompiledProgram::run(std::span<const double> view, std::span<const double> action) const {
    std::vector<double> stack;
    stack.reserve(16);
    std::vector<double> locals(std::size_t(n_locals_), 0.0);

    auto pop = [&stack]() {
        double v = stack.back();
        stack.pop_back();
        return v;
    };

    std::size_t ip = 0;
    while (ip < code_.size()) {
        const Instr& in = code_[ip];
        switch (in.op) {
        case Op::push_const: stack.push_back(in.value); ++ip; break;
        case Op::load_view: stack.push_back(view[std::size_t(in.arg)]); ++ip; break;
        case Op::load_action: stack.push_back(action[std::size_t(in.arg)]); ++ip; break;
        case Op::load_local: stack.push_back(locals[std::size_t(in.arg)]); ++ip; break;
        case Op::store_local: locals[std::size_t(in.arg)] = pop(); ++ip; break;
        case Op::neg: stack.back() = -stack.back(); ++ip; break;
        case Op::logic_not: stack.back() = stack.back() == 0.0 ? 1.0 : 0.0; ++ip; break;
        case Op::jump: ip = std::size_t(in.arg); break;
        case Op::jump_if_zero:
            if (pop() == 0.0)
                ip = std::size_t(in.arg);
            else
                ++ip;
            break;
        case Op::jump_if_nonzero:
            if (pop() != 0.0)
                ip = std::size_t(in.arg);
            else
                ++ip;
            break;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div: {
            double b = pop();
            double a = stack.back();
            double r;
            if (in.op == Op::add)
                r = a + b;
            else if (in.op == Op::sub)
                r = a - b;
            else if (in.op == Op::mul)
                r = a * b;
            else {
                if (b == 0.0)
                    throw EvalError(in.pos, "division by zero");
                r = a / b;
            }
            if (!std::isfinite(r))
                throw EvalError(in.pos, "arithmetic overflow");
            stack.back() = r;
            ++ip;
            break;
        }
        case Op::lt:
        case Op::le:
        case Op::gt:
        case Op::ge:
        case Op::eq: {
            double b = pop();
            double a = stack.back();
            bool r;
            switch (in.op) {
            case Op::lt: r = a < b; break;
            case Op::le: r = a <= b; break;
            case Op::gt: r = a > b; break;
            case Op::ge: r = a >= b; break;
            default: r = a == b; break;
            }
            stack.back() = r ? 1.0 : 0.0;
            ++ip;
            break;
        }
        case Op::call_abs: stack.back() = std::fabs(stack.back()); ++ip; break;
        case Op::call_min: {
            double b = pop();
            stack.back() = std::min(stack.back(), b);
            ++ip;
            break;
        }
        case Op::call_max: {
            double b = pop();
            stack.back() = std::max(stack.back(), b);
            ++ip;
            break;
        }
        case Op::call_exp: {
            double r = std::exp(stack.back());
            if (!std::isfinite(r))
                throw EvalError(in.pos, "arithmetic overflow");
            stack.back() = r;
            ++ip;
            break;
        }
        case Op::call_log:
            if (!(stack.back() > 0.0))
                throw EvalError(in.pos, "log of a non-positive value");
            stack.back() = std::log(stack.back());
            ++ip;
            break;
        case Op::call_sqrt:
            if (stack.back() < 0.0)
                throw EvalError(in.pos, "sqrt of a negative value");
            stack.back() = std::sqrt(stack.back());
            ++ip;
            break;
        case Op::call_tanh: stack.back() = std::tanh(stack.back()); ++ip; break;
        case Op::call_sin: stack.back() = std::sin(stack.back()); ++ip; break;
        case Op::call_cos: stack.back() = std::cos(stack.back()); ++ip; break;
        case Op::call_clip: {
            double hi = pop();
            double lo = pop();
            if (lo > hi)
                throw EvalError(in.pos, "clip with an empty range");
            stack.back() = std::min(std::max(stack.back(), lo), hi);
            ++ip;
            break;
        }
        case Op::call_sq: {
            double r = stack.back() * stack.back();
            if (!std::isfinite(r))
                throw EvalError(in.pos, "arithmetic overflow");
            stack.back() = r;
            ++ip;
            break;
        }
        }
    }
    return stack.back();
}

double CompiledProgram::eval_reward(std::span<const double> view, std::span<const double> action) const {
    return run(view, action);
}

int CompiledProgram::eval_flag(std::span<const double> view) const {
    double v = run(view, {});
    return v == 0.0 ? 0 : 1;
}

// ---------------------------------------------------------------- files

Program load_program_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError({0, 0}, "cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();

    std::size_t line_end = text.find('\n');
    std::string header = line_end == std::string::npos ? text : text.substr(0, line_end);
    ProgramKind kind;
    if (header == "# kind: reward")
        kind = ProgramKind::reward;
    else if (header == "# kind: eval")
        kind = ProgramKind::eval;
    else
        throw ParseError({1, 1}, "program file must start with '# kind: reward' or '# kind: eval'");
    // the header line stays in the parsed text as a comment, keeping positions 1-based on the file
    return parse(text, kind);
}

void save_program_file(const std::filesystem::path& path, const Program& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ParseError({0, 0}, "cannot write '" + path.string() + "'");
    out << (p.kind == ProgramKind::reward ? "# kind: reward\n" : "# kind: eval\n") << print(p);
}

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"abs", "min",  "max", "exp",  "log", "sqrt",
                                                   "tanh", "sin", "cos", "clip", "sq"};
    return names;
}

} // namespace recoverl::dsl
