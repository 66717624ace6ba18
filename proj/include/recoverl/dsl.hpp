#pragma once
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "recoverl/schema.hpp"

namespace recoverl::dsl {

// Total expression language for generated reward and validity programs:
//
//   program := { "let" ident "=" expr ";" } "return" expr ";"
//
// "#" starts a line comment. Operators by rising precedence: or, and,
// comparisons (< <= > >= ==), + -, * /, unary - and not. Comparisons and the
// logical operators return 1.0 / 0.0, any nonzero value counts as true, and
// "and" / "or" / "if(cond, a, b)" evaluate lazily. Calls are limited to a
// fixed whitelist. Reward programs read view and action identifiers and
// return a scalar; eval programs read view identifiers only and must return
// 0 or 1 by construction.

struct SourcePos {
    int line = 0;
    int col = 0;
};

struct ParseError : std::runtime_error {
    ParseError(SourcePos p, const std::string& msg);
    SourcePos pos;
};

struct EvalError : std::runtime_error {
    EvalError(SourcePos p, const std::string& msg);
    SourcePos pos;
};

enum class ProgramKind { reward, eval };

enum class BinOp { add, sub, mul, div, lt, le, gt, ge, eq, logic_and, logic_or };
enum class UnOp { neg, logic_not };
enum class Builtin { abs, min, max, exp, log, sqrt, tanh, sin, cos, clip, sq };

struct Expr {
    enum class Kind { number, ident, unary, binary, call, cond };
    Kind kind = Kind::number;
    SourcePos pos;
    double number = 0.0;
    std::string name;  // ident or call name
    UnOp un{};
    BinOp bin{};
    std::vector<Expr> args;  // unary 1, binary 2, cond 3, call n
};

struct Binding {
    std::string name;
    SourcePos pos;
    Expr value;
};

struct Program {
    ProgramKind kind = ProgramKind::reward;
    std::vector<Binding> bindings;
    Expr result;
};

Program parse(std::string_view source, ProgramKind kind);

// Canonical text: one statement per line, fully parenthesized subexpressions,
// numbers printed with 17 significant digits so reprints round-trip exactly.
std::string print(const Program& p);

// Structural equality, positions ignored.
bool equal(const Program& a, const Program& b);
bool equal(const Expr& a, const Expr& b);

struct ValidationIssue {
    SourcePos pos;
    std::string message;
};

// Checks identifier resolution against the schemas (actions is null for eval
// programs and forbidden to them anyway), call names and arities, binding
// rules, and for eval programs the 0/1 result shape. Empty result means valid.
std::vector<ValidationIssue> validate(const Program& p, const FieldSchema& view, const FieldSchema* actions);

// Flat-tape stack VM form of a validated program. Evaluation is total over
// finite inputs: domain faults (x/0, log of <= 0, sqrt of negatives, overflow
// to non-finite) throw EvalError naming the source position.
class CompiledProgram {
public:
    ProgramKind kind() const { return kind_; }

    double eval_reward(std::span<const double> view, std::span<const double> action) const;
    int eval_flag(std::span<const double> view) const;

    enum class Op : std::uint8_t {
        push_const,
        load_view,
        load_action,
        load_local,
        store_local,
        neg,
        logic_not,
        add,
        sub,
        mul,
        div,
        lt,
        le,
        gt,
        ge,
        eq,
        jump,
        jump_if_zero,
        jump_if_nonzero,
        call_abs,
        call_min,
        call_max,
        call_exp,
        call_log,
        call_sqrt,
        call_tanh,
        call_sin,
        call_cos,
        call_clip,
        call_sq,
    };
    struct Instr {
        Op op;
        std::int32_t arg = 0;
        double value = 0.0;
        SourcePos pos;
    };

private:
    friend CompiledProgram compile(const Program&, const FieldSchema&, const FieldSchema*);

    double run(std::span<const double> view, std::span<const double> action) const;

    ProgramKind kind_ = ProgramKind::reward;
    std::vector<Instr> code_;
    int n_locals_ = 0;
};

// Validates, then lowers to the tape form; throws ParseError-style
// ValidationFailure listing the first issue.
struct ValidationFailure : std::runtime_error {
    explicit ValidationFailure(std::vector<ValidationIssue> issues);
    std::vector<ValidationIssue> issues;
};

CompiledProgram compile(const Program& p, const FieldSchema& view, const FieldSchema* actions);

// Program files start with "# kind: reward" or "# kind: eval"; the remainder
// is the program source.
Program load_program_file(const std::filesystem::path& path);
void save_program_file(const std::filesystem::path& path, const Program& p);

const std::vector<std::string>& builtin_names();

} // namespace recoverl::dsl
