#include "steer/orchestrator.hpp"

#include <cctype>

namespace steer {

PlanParseError::PlanParseError(Code code, int line, int column, std::string message)
    : std::runtime_error(std::string(to_string(code)) + " at " + std::to_string(line) + ":" + std::to_string(column) +
                         ": " + message),
      code_(code), line_(line), column_(column), message_(std::move(message)) {}

std::string_view to_string(PlanParseError::Code code) {
    switch (code) {
        case PlanParseError::Code::syntax:
            return "syntax_error";
        case PlanParseError::Code::empty_program:
            return "empty_program";
        case PlanParseError::Code::unknown_function:
            return "unknown_function";
        case PlanParseError::Code::arity:
            return "arity_mismatch";
        case PlanParseError::Code::invalid_modifier:
            return "invalid_modifier";
    }
    return "syntax_error";
}

namespace {

struct Token {
    enum class Kind { identifier, string, lparen, rparen, comma, semicolon, end };
    Kind kind = Kind::end;
    std::string text;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_blank();
        Token t;
        t.line = line_;
        t.column = column_;
        if (pos_ >= src_.size()) {
            return t;
        }
        const char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            t.kind = Token::Kind::identifier;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                t.text += advance();
            }
            return t;
        }
        if (c == '"' || c == '\'') {
            t.kind = Token::Kind::string;
            t.text = read_string(c, t);
            return t;
        }
        advance();
        switch (c) {
            case '(':
                t.kind = Token::Kind::lparen;
                return t;
            case ')':
                t.kind = Token::Kind::rparen;
                return t;
            case ',':
                t.kind = Token::Kind::comma;
                return t;
            case ';':
                t.kind = Token::Kind::semicolon;
                return t;
            default:
                throw PlanParseError(PlanParseError::Code::syntax, t.line, t.column,
                                     std::string("unexpected character '") + c + "'");
        }
    }

private:
    char advance() {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    void skip_blank() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    advance();
                }
            } else {
                break;
            }
        }
    }

    std::string read_string(char quote, const Token& at) {
        advance();
        std::string out;
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') {
                throw PlanParseError(PlanParseError::Code::syntax, at.line, at.column, "unterminated string");
            }
            const char c = advance();
            if (c == quote) {
                return out;
            }
            if (c == '\\') {
                if (pos_ >= src_.size()) {
                    throw PlanParseError(PlanParseError::Code::syntax, at.line, at.column, "unterminated string");
                }
                const char e = advance();
                switch (e) {
                    case 'n':
                        out += '\n';
                        break;
                    case 't':
                        out += '\t';
                        break;
                    default:
                        out += e;
                }
                continue;
            }
            out += c;
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

std::string describe(const Token& t) {
    switch (t.kind) {
        case Token::Kind::identifier:
            return "'" + t.text + "'";
        case Token::Kind::string:
            return "string";
        case Token::Kind::lparen:
            return "'('";
        case Token::Kind::rparen:
            return "')'";
        case Token::Kind::comma:
            return "','";
        case Token::Kind::semicolon:
            return "';'";
        case Token::Kind::end:
            return "end of program";
    }
    return "token";
}

[[noreturn]] void expected(const char* what, const Token& got) {
    throw PlanParseError(PlanParseError::Code::syntax, got.line, got.column,
                         std::string("expected ") + what + ", found " + describe(got));
}

}  // namespace

Plan parse_plan(std::string_view text) {
    Lexer lex(text);
    Plan plan;
    plan.source_text = std::string(text);
    Token tok = lex.next();
    if (tok.kind == Token::Kind::end) {
        throw PlanParseError(PlanParseError::Code::empty_program, tok.line, tok.column, "empty program");
    }
    while (tok.kind != Token::Kind::end) {
        if (tok.kind != Token::Kind::identifier) {
            expected("a skill name", tok);
        }
        const Token name = tok;
        SkillKind kind;
        try {
            kind = skill_kind_from_string(name.text);
        } catch (const std::invalid_argument&) {
            throw PlanParseError(PlanParseError::Code::unknown_function, name.line, name.column,
                                 "unknown function '" + name.text + "'");
        }
        tok = lex.next();
        if (tok.kind != Token::Kind::lparen) {
            expected("'('", tok);
        }
        std::vector<Token> args;
        tok = lex.next();
        if (tok.kind != Token::Kind::rparen) {
            while (true) {
                if (tok.kind != Token::Kind::string) {
                    expected("a quoted argument", tok);
                }
                args.push_back(tok);
                tok = lex.next();
                if (tok.kind == Token::Kind::comma) {
                    tok = lex.next();
                    continue;
                }
                if (tok.kind != Token::Kind::rparen) {
                    expected("',' or ')'", tok);
                }
                break;
            }
        }
        const std::size_t want = (kind == SkillKind::grasp || kind == SkillKind::reorient) ? 2 : 1;
        if (args.size() != want) {
            throw PlanParseError(PlanParseError::Code::arity, name.line, name.column,
                                 name.text + " takes " + std::to_string(want) + " argument" + (want == 1 ? "" : "s") +
                                     ", got " + std::to_string(args.size()));
        }
        if (args[0].text.empty()) {
            throw PlanParseError(PlanParseError::Code::syntax, args[0].line, args[0].column, "empty object name");
        }
        SkillCall call{kind, args[0].text, std::nullopt, std::nullopt};
        if (kind == SkillKind::grasp) {
            call.approach = parse_grasp_modifier(args[1].text);
            if (!call.approach) {
                throw PlanParseError(PlanParseError::Code::invalid_modifier, args[1].line, args[1].column,
                                     "invalid grasp approach \"" + args[1].text +
                                         "\" (expected \"top-down\", \"side\" or \"diagonal\")");
            }
        } else if (kind == SkillKind::reorient) {
            call.direction = parse_reorient_modifier(args[1].text);
            if (!call.direction) {
                throw PlanParseError(PlanParseError::Code::invalid_modifier, args[1].line, args[1].column,
                                     "invalid reorient direction \"" + args[1].text +
                                         "\" (expected \"horizontal\" or \"upright\")");
            }
        }
        plan.calls.push_back(std::move(call));
        tok = lex.next();
        if (tok.kind == Token::Kind::semicolon) {
            tok = lex.next();
        }
    }
    return plan;
}

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        switch (c) {
            case '"':
                out += "\\\"";
                break;
            case '\\':
                out += "\\\\";
                break;
            case '\n':
                out += "\\n";
                break;
            case '\t':
                out += "\\t";
                break;
            default:
                out += c;
        }
    }
    return out + "\"";
}

}  // namespace

std::string to_dsl(const SkillCall& call) {
    std::string out(to_string(call.name));
    out += '(';
    out += quote(call.object);
    if (const auto m = call.modifier_text()) {
        out += ", ";
        out += quote(*m);
    }
    out += ')';
    return out;
}

std::string to_dsl(const std::vector<SkillCall>& calls) {
    std::string out;
    for (const SkillCall& c : calls) {
        out += to_dsl(c);
        out += '\n';
    }
    return out;
}

std::string ValidationReport::summary() const {
    std::string out;
    for (const PlanIssue& e : errors) {
        out += "error at call " + std::to_string(e.call_index) + ": " + e.message + "\n";
    }
    for (const PlanIssue& w : warnings) {
        out += "warning at call " + std::to_string(w.call_index) + ": " + w.message + "\n";
    }
    return out;
}

ValidationReport validate_plan(const std::vector<SkillCall>& calls, const SceneState& scene) {
    ValidationReport report;
    std::optional<std::string> held = scene.held_object();
    for (std::size_t i = 0; i < calls.size(); ++i) {
        const SkillCall& c = calls[i];
        if (!scene.objects.contains(c.object)) {
            report.warnings.push_back({i, "unknown object \"" + c.object + "\""});
        }
        const std::string skill(to_string(c.name));
        if (c.name == SkillKind::grasp) {
            if (held) {
                report.errors.push_back({i, "grasp of \"" + c.object + "\" while holding \"" + *held + "\""});
                continue;
            }
            held = c.object;
            continue;
        }
        if (!held) {
            report.errors.push_back({i, skill + " of \"" + c.object + "\" before it is grasped"});
            continue;
        }
        if (*held != c.object) {
            report.errors.push_back({i, skill + " of \"" + c.object + "\" while holding \"" + *held + "\""});
            continue;
        }
        if (c.name == SkillKind::place) {
            held.reset();
        }
    }
    return report;
}

std::optional<std::size_t> ExecutionLog::halted_at() const {
    if (completed || entries.empty()) {
        return std::nullopt;
    }
    return entries.back().call_index;
}

ExecutionLog execute_plan(const Plan& plan, SceneState& scene, const SimOptions& options,
                          const StepObserver& observer) {
    ExecutionLog log;
    for (std::size_t i = 0; i < plan.calls.size(); ++i) {
        const SkillCall& call = plan.calls[i];
        ExecutionEntry entry;
        entry.call_index = i;
        entry.call = call;
        entry.language = render_language(call);
        try {
            SkillOutcome outcome = exec_call(scene, call, options, observer);
            entry.success = outcome.success;
            entry.reason = std::move(outcome.reason);
            entry.steps = outcome.trajectory.size();
        } catch (const SimError& e) {
            entry.success = false;
            entry.reason = e.what();
        }
        entry.state_after = scene;
        const bool ok = entry.success;
        log.entries.push_back(std::move(entry));
        if (!ok) {
            return log;
        }
    }
    log.completed = true;
    return log;
}

std::vector<SkillCall> pour_plan(const std::string& object) {
    return {SkillCall::grasp(object, GraspApproachClass::side), SkillCall::lift(object),
            SkillCall::reorient(object, ReorientDirection::to_horizontal),
            SkillCall::reorient(object, ReorientDirection::to_upright), SkillCall::place(object)};
}

std::vector<SkillCall> unstack_flip_plan(const std::string& object) {
    return {SkillCall::grasp(object, GraspApproachClass::side), SkillCall::lift(object),
            SkillCall::reorient(object, ReorientDirection::to_upright), SkillCall::place(object)};
}

}  // namespace steer
