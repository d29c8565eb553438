#include "schemacoder/regex.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace schemacoder {

namespace {

constexpr std::size_t kMaxProgram = 40000;
constexpr std::size_t kMaxRepeat = 1000;

constexpr std::size_t kLenUnbounded = std::numeric_limits<std::size_t>::max();

struct Node;
using NodePtr = std::unique_ptr<Node>;

enum class Kind {
    empty,
    literal,
    any,
    klass,
    concat,
    alternate,
    repeat,
    group,
    assert_start,
    assert_end,
    assert_word,
    assert_non_word,
};

struct Node {
    Kind kind = Kind::empty;
    unsigned char literal = 0;
    std::bitset<256> klass;
    std::vector<NodePtr> children;
    std::size_t min = 0;
    std::size_t max = 0;  // kLenUnbounded for open repeats
    bool lazy = false;
    int group_index = -1;  // -1 for non-capturing
};

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::bitset<256> digit_set() {
    std::bitset<256> s;
    for (int c = '0'; c <= '9'; ++c) s.set(static_cast<std::size_t>(c));
    return s;
}

std::bitset<256> word_set() {
    std::bitset<256> s = digit_set();
    for (int c = 'a'; c <= 'z'; ++c) s.set(static_cast<std::size_t>(c));
    for (int c = 'A'; c <= 'Z'; ++c) s.set(static_cast<std::size_t>(c));
    s.set('_');
    return s;
}

std::bitset<256> space_set() {
    std::bitset<256> s;
    for (char c : {' ', '\t', '\n', '\r', '\f', '\v'}) s.set(static_cast<unsigned char>(c));
    return s;
}

class Parser {
public:
    Parser(std::string_view pattern) : src_(pattern) {}

    NodePtr parse(int& group_count, int& literal_count) {
        NodePtr root = parse_alternate();
        if (pos_ != src_.size()) fail("unexpected ')'");
        group_count = next_group_;
        literal_count = literal_count_;
        return root;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    int next_group_ = 0;
    int literal_count_ = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw RegexSyntaxError("regex: " + why + " at offset " + std::to_string(pos_) + " in /" +
                               std::string(src_) + "/");
    }

    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }
    char take() { return src_[pos_++]; }

    NodePtr make(Kind k) {
        auto n = std::make_unique<Node>();
        n->kind = k;
        return n;
    }

    NodePtr parse_alternate() {
        std::vector<NodePtr> branches;
        branches.push_back(parse_concat());
        while (!eof() && peek() == '|') {
            take();
            branches.push_back(parse_concat());
        }
        if (branches.size() == 1) return std::move(branches.front());
        auto n = make(Kind::alternate);
        n->children = std::move(branches);
        return n;
    }

    NodePtr parse_concat() {
        auto n = make(Kind::concat);
        while (!eof() && peek() != '|' && peek() != ')') {
            n->children.push_back(parse_repeat());
        }
        if (n->children.empty()) return make(Kind::empty);
        if (n->children.size() == 1) return std::move(n->children.front());
        return n;
    }

    NodePtr parse_repeat() {
        NodePtr atom = parse_atom();
        while (!eof()) {
            char c = peek();
            std::size_t min = 0;
            std::size_t max = 0;
            if (c == '*') {
                take();
                min = 0;
                max = kLenUnbounded;
            } else if (c == '+') {
                take();
                min = 1;
                max = kLenUnbounded;
            } else if (c == '?') {
                take();
                min = 0;
                max = 1;
            } else if (c == '{') {
                std::size_t save = pos_;
                if (!parse_brace(min, max)) {
                    pos_ = save;
                    break;  // literal '{'
                }
            } else {
                break;
            }
            if (atom->kind == Kind::assert_start || atom->kind == Kind::assert_end ||
                atom->kind == Kind::assert_word || atom->kind == Kind::assert_non_word) {
                fail("quantifier on anchor");
            }
            auto rep = make(Kind::repeat);
            rep->min = min;
            rep->max = max;
            if (!eof() && peek() == '?') {
                take();
                rep->lazy = true;
            }
            rep->children.push_back(std::move(atom));
            atom = std::move(rep);
        }
        return atom;
    }

    // Returns false when the brace expression is not a valid counted repeat
    // (then '{' is treated as a literal, as most engines do).
    bool parse_brace(std::size_t& min, std::size_t& max) {
        take();  // '{'
        std::size_t lo = 0;
        bool has_lo = false;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            lo = lo * 10 + static_cast<std::size_t>(take() - '0');
            has_lo = true;
            if (lo > kMaxRepeat) fail("repeat count too large");
        }
        if (!has_lo) return false;
        if (!eof() && peek() == '}') {
            take();
            min = max = lo;
            return true;
        }
        if (eof() || peek() != ',') return false;
        take();  // ','
        if (!eof() && peek() == '}') {
            take();
            min = lo;
            max = kLenUnbounded;
            return true;
        }
        std::size_t hi = 0;
        bool has_hi = false;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            hi = hi * 10 + static_cast<std::size_t>(take() - '0');
            has_hi = true;
            if (hi > kMaxRepeat) fail("repeat count too large");
        }
        if (!has_hi || eof() || peek() != '}') return false;
        take();
        if (hi < lo) fail("repeat range out of order");
        min = lo;
        max = hi;
        return true;
    }

    NodePtr parse_atom() {
        if (eof()) fail("dangling quantifier or empty atom");
        char c = take();
        switch (c) {
            case '(': {
                bool capturing = true;
                if (!eof() && peek() == '?') {
                    take();
                    if (eof() || take() != ':') fail("unsupported group modifier");
                    capturing = false;
                }
                auto n = make(Kind::group);
                n->group_index = capturing ? next_group_++ : -1;
                n->children.push_back(parse_alternate());
                if (eof() || take() != ')') fail("unclosed group");
                return n;
            }
            case ')':
                fail("unbalanced ')'");
            case '[':
                return parse_class();
            case '.':
                return make(Kind::any);
            case '^':
                return make(Kind::assert_start);
            case '$':
                return make(Kind::assert_end);
            case '*':
            case '+':
            case '?':
                fail("quantifier with nothing to repeat");
            case '\\':
                return parse_escape(false);
            default: {
                auto n = make(Kind::literal);
                n->literal = static_cast<unsigned char>(c);
                ++literal_count_;
                return n;
            }
        }
    }

    NodePtr parse_escape(bool in_class) {
        if (eof()) fail("trailing backslash");
        char c = take();
        auto class_node = [&](std::bitset<256> s, bool negate) {
            auto n = make(Kind::klass);
            n->klass = negate ? ~s : s;
            return n;
        };
        switch (c) {
            case 'd': return class_node(digit_set(), false);
            case 'D': return class_node(digit_set(), true);
            case 'w': return class_node(word_set(), false);
            case 'W': return class_node(word_set(), true);
            case 's': return class_node(space_set(), false);
            case 'S': return class_node(space_set(), true);
            case 'b':
                if (in_class) fail("\\b not allowed in class");
                return make(Kind::assert_word);
            case 'B':
                if (in_class) fail("\\B not allowed in class");
                return make(Kind::assert_non_word);
            case 'n': return literal_node('\n');
            case 't': return literal_node('\t');
            case 'r': return literal_node('\r');
            case 'f': return literal_node('\f');
            case 'v': return literal_node('\v');
            case '0': return literal_node('\0');
            case 'x': {
                int hi = hex_digit();
                int lo = hex_digit();
                return literal_node(static_cast<char>(hi * 16 + lo));
            }
            default:
                if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '1' && c <= '9')) {
                    fail(std::string("unsupported escape \\") + c);
                }
                return literal_node(c);
        }
    }

    int hex_digit() {
        if (eof()) fail("truncated \\x escape");
        char c = take();
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        fail("bad hex digit in \\x escape");
    }

    NodePtr literal_node(char c) {
        auto n = make(Kind::literal);
        n->literal = static_cast<unsigned char>(c);
        ++literal_count_;
        return n;
    }

    NodePtr parse_class() {
        auto n = make(Kind::klass);
        bool negate = false;
        if (!eof() && peek() == '^') {
            take();
            negate = true;
        }
        std::bitset<256> set;
        bool first = true;
        while (true) {
            if (eof()) fail("unclosed character class");
            char c = peek();
            if (c == ']' && !first) {
                take();
                break;
            }
            first = false;
            take();
            if (c == '\\') {
                NodePtr esc = parse_escape(true);
                if (esc->kind == Kind::klass) {
                    set |= esc->klass;
                    continue;
                }
                c = static_cast<char>(esc->literal);
                --literal_count_;  // class members are not pattern literals
            }
            // Possible range a-z; '-' at the end of the class is literal.
            if (!eof() && peek() == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] != ']') {
                take();  // '-'
                char hi_c = take();
                if (hi_c == '\\') {
                    NodePtr esc = parse_escape(true);
                    if (esc->kind == Kind::klass) fail("class escape cannot end a range");
                    hi_c = static_cast<char>(esc->literal);
                    --literal_count_;
                }
                unsigned char lo = static_cast<unsigned char>(c);
                unsigned char hi = static_cast<unsigned char>(hi_c);
                if (hi < lo) fail("character range out of order");
                for (unsigned int b = lo; b <= hi; ++b) set.set(b);
            } else {
                set.set(static_cast<unsigned char>(c));
            }
        }
        n->klass = negate ? ~set : set;
        return n;
    }
};

struct LenInfo {
    std::size_t min = 0;
    std::size_t max = 0;
    bool nullable = false;
    bool first_any = false;
    std::bitset<256> first;
};

std::size_t add_len(std::size_t a, std::size_t b) {
    if (a == kLenUnbounded || b == kLenUnbounded) return kLenUnbounded;
    if (a > kLenUnbounded - b) return kLenUnbounded;
    return a + b;
}

std::size_t mul_len(std::size_t a, std::size_t b) {
    if (a == 0 || b == 0) return 0;
    if (a == kLenUnbounded || b == kLenUnbounded) return kLenUnbounded;
    if (a > kLenUnbounded / b) return kLenUnbounded;
    return a * b;
}

LenInfo analyze(const Node& n) {
    LenInfo out;
    switch (n.kind) {
        case Kind::empty:
        case Kind::assert_start:
        case Kind::assert_end:
        case Kind::assert_word:
        case Kind::assert_non_word:
            out.nullable = true;
            return out;
        case Kind::literal:
            out.min = out.max = 1;
            out.first.set(n.literal);
            return out;
        case Kind::any:
            out.min = out.max = 1;
            out.first_any = true;
            return out;
        case Kind::klass:
            out.min = out.max = 1;
            out.first = n.klass;
            return out;
        case Kind::group:
            return analyze(*n.children.front());
        case Kind::concat: {
            out.nullable = true;
            bool first_open = true;
            for (const auto& child : n.children) {
                LenInfo ci = analyze(*child);
                out.min = add_len(out.min, ci.min);
                out.max = add_len(out.max, ci.max);
                if (first_open) {
                    out.first |= ci.first;
                    out.first_any = out.first_any || ci.first_any;
                    if (!ci.nullable) first_open = false;
                }
                out.nullable = out.nullable && ci.nullable;
            }
            return out;
        }
        case Kind::alternate: {
            out.min = kLenUnbounded;
            for (const auto& child : n.children) {
                LenInfo ci = analyze(*child);
                out.min = std::min(out.min, ci.min);
                out.max = std::max(out.max, ci.max);
                out.nullable = out.nullable || ci.nullable;
                out.first |= ci.first;
                out.first_any = out.first_any || ci.first_any;
            }
            return out;
        }
        case Kind::repeat: {
            LenInfo ci = analyze(*n.children.front());
            out.min = mul_len(ci.min, n.min);
            out.max = mul_len(ci.max, n.max);
            out.nullable = n.min == 0 || ci.nullable;
            out.first = ci.first;
            out.first_any = ci.first_any;
            return out;
        }
    }
    return out;
}

bool node_nullable(const Node& n) {
    return analyze(n).nullable;
}

}  // namespace

class RegexCompiler {
public:
    explicit RegexCompiler(Regex& re) : re_(re) {}

    void run(const Node& root) {
        emit_save(0);
        compile(root);
        emit_save(1);
        emit(Regex::Inst{Regex::Op::match});
    }

private:
    Regex& re_;

    std::int32_t emit(Regex::Inst inst) {
        if (re_.prog_.size() >= kMaxProgram) {
            throw RegexSyntaxError("regex: compiled program too large in /" + re_.pattern_ + "/");
        }
        re_.prog_.push_back(inst);
        return static_cast<std::int32_t>(re_.prog_.size() - 1);
    }

    void emit_save(int slot) {
        Regex::Inst i{Regex::Op::save};
        i.x = slot;
        emit(i);
    }

    std::int32_t here() const { return static_cast<std::int32_t>(re_.prog_.size()); }

    void compile(const Node& n) {
        switch (n.kind) {
            case Kind::empty:
                return;
            case Kind::literal: {
                Regex::Inst i{Regex::Op::byte};
                i.byte = n.literal;
                emit(i);
                return;
            }
            case Kind::any:
                emit(Regex::Inst{Regex::Op::any});
                return;
            case Kind::klass: {
                Regex::Inst i{Regex::Op::klass};
                i.x = static_cast<std::int32_t>(re_.classes_.size());
                re_.classes_.push_back(n.klass);
                emit(i);
                return;
            }
            case Kind::assert_start:
                emit(Regex::Inst{Regex::Op::assert_start});
                return;
            case Kind::assert_end:
                emit(Regex::Inst{Regex::Op::assert_end});
                return;
            case Kind::assert_word:
                emit(Regex::Inst{Regex::Op::assert_word});
                return;
            case Kind::assert_non_word:
                emit(Regex::Inst{Regex::Op::assert_non_word});
                return;
            case Kind::group: {
                if (n.group_index >= 0) {
                    emit_save(2 * (n.group_index + 1));
                    compile(*n.children.front());
                    emit_save(2 * (n.group_index + 1) + 1);
                } else {
                    compile(*n.children.front());
                }
                return;
            }
            case Kind::concat:
                for (const auto& child : n.children) compile(*child);
                return;
            case Kind::alternate: {
                std::vector<std::int32_t> jumps;
                for (std::size_t b = 0; b < n.children.size(); ++b) {
                    bool last = b + 1 == n.children.size();
                    if (!last) {
                        std::int32_t split = emit(Regex::Inst{Regex::Op::split});
                        compile(*n.children[b]);
                        jumps.push_back(emit(Regex::Inst{Regex::Op::jump}));
                        re_.prog_[static_cast<std::size_t>(split)].x = split + 1;
                        re_.prog_[static_cast<std::size_t>(split)].y = here();
                    } else {
                        compile(*n.children[b]);
                    }
                }
                for (std::int32_t j : jumps) re_.prog_[static_cast<std::size_t>(j)].x = here();
                return;
            }
            case Kind::repeat:
                compile_repeat(n);
                return;
        }
    }

    void compile_repeat(const Node& n) {
        const Node& body = *n.children.front();
        // Mandatory copies first.
        for (std::size_t i = 0; i < n.min; ++i) compile(body);
        if (n.max == kLenUnbounded) {
            compile_star(body, n.lazy);
        } else {
            // Optional tail: (x(x(...)?)?)? via nested quests.
            std::vector<std::int32_t> splits;
            for (std::size_t i = n.min; i < n.max; ++i) {
                std::int32_t split = emit(Regex::Inst{Regex::Op::split});
                splits.push_back(split);
                compile(body);
            }
            std::int32_t end = here();
            for (std::int32_t s : splits) {
                auto& inst = re_.prog_[static_cast<std::size_t>(s)];
                if (n.lazy) {
                    inst.x = end;
                    inst.y = s + 1;
                } else {
                    inst.x = s + 1;
                    inst.y = end;
                }
            }
        }
    }

    void compile_star(const Node& body, bool lazy) {
        bool guard = node_nullable(body);
        std::int32_t loop_reg = -1;
        if (guard) loop_reg = re_.loop_count_++;

        std::int32_t split = emit(Regex::Inst{Regex::Op::split});
        if (guard) {
            Regex::Inst p{Regex::Op::progress};
            p.x = loop_reg;
            emit(p);
        }
        compile(body);
        Regex::Inst j{Regex::Op::jump};
        j.x = split;
        emit(j);
        std::int32_t end = here();
        auto& inst = re_.prog_[static_cast<std::size_t>(split)];
        if (lazy) {
            inst.x = end;
            inst.y = split + 1;
        } else {
            inst.x = split + 1;
            inst.y = end;
        }
    }
};

Regex Regex::compile(std::string_view pattern) {
    Regex re;
    re.pattern_.assign(pattern);
    Parser parser(pattern);
    int groups = 0;
    int literals = 0;
    NodePtr root = parser.parse(groups, literals);
    re.group_count_ = groups;
    re.literal_count_ = literals;

    LenInfo info = analyze(*root);
    re.min_len_ = info.min;
    re.max_len_ = info.max;
    re.nullable_ = info.nullable;
    re.first_any_ = info.first_any;
    re.first_bytes_ = info.first;

    RegexCompiler(re).run(*root);
    return re;
}

Regex::Outcome Regex::full_match(std::string_view line, std::vector<std::string>* captures,
                                 std::int64_t& budget) const {
    Outcome out;
    const std::size_t len = line.size();

    // Prefilters: cheap exact-safe rejections.
    if (len < min_len_) return out;
    if (max_len_ != kLenUnbounded && len > max_len_) return out;
    if (len == 0) {
        if (!nullable_) return out;
    } else if (!first_any_ && !first_bytes_.test(static_cast<unsigned char>(line[0]))) {
        return out;
    }

    const std::size_t n_slots = 2 * static_cast<std::size_t>(group_count_ + 1);
    const std::size_t n_regs = n_slots + static_cast<std::size_t>(loop_count_);
    std::vector<std::int32_t> regs(n_regs, -1);

    struct Undo {
        std::int32_t reg;
        std::int32_t old;
    };
    struct Frame {
        std::int32_t pc;
        std::int32_t pos;
        std::uint32_t undo_depth;
    };
    std::vector<Undo> undo;
    std::vector<Frame> stack;

    std::int32_t pc = 0;
    std::int32_t pos = 0;

    auto set_reg = [&](std::size_t reg, std::int32_t value) {
        undo.push_back(Undo{static_cast<std::int32_t>(reg), regs[reg]});
        regs[reg] = value;
    };

    auto backtrack = [&]() -> bool {
        if (stack.empty()) return false;
        Frame f = stack.back();
        stack.pop_back();
        while (undo.size() > f.undo_depth) {
            regs[static_cast<std::size_t>(undo.back().reg)] = undo.back().old;
            undo.pop_back();
        }
        pc = f.pc;
        pos = f.pos;
        return true;
    };

    auto word_at = [&](std::int32_t p) {
        return p >= 0 && p < static_cast<std::int32_t>(len) &&
               is_word_byte(static_cast<unsigned char>(line[static_cast<std::size_t>(p)]));
    };

    while (true) {
        if (--budget < 0) {
            budget = 0;
            out.step_limit_hit = true;
            return out;
        }
        const Inst& inst = prog_[static_cast<std::size_t>(pc)];
        switch (inst.op) {
            case Op::byte:
                if (pos < static_cast<std::int32_t>(len) &&
                    static_cast<unsigned char>(line[static_cast<std::size_t>(pos)]) == inst.byte) {
                    ++pc;
                    ++pos;
                    continue;
                }
                break;
            case Op::any:
                if (pos < static_cast<std::int32_t>(len)) {
                    ++pc;
                    ++pos;
                    continue;
                }
                break;
            case Op::klass:
                if (pos < static_cast<std::int32_t>(len) &&
                    classes_[static_cast<std::size_t>(inst.x)].test(
                        static_cast<unsigned char>(line[static_cast<std::size_t>(pos)]))) {
                    ++pc;
                    ++pos;
                    continue;
                }
                break;
            case Op::split:
                stack.push_back(Frame{inst.y, pos, static_cast<std::uint32_t>(undo.size())});
                pc = inst.x;
                continue;
            case Op::jump:
                pc = inst.x;
                continue;
            case Op::save:
                set_reg(static_cast<std::size_t>(inst.x), pos);
                ++pc;
                continue;
            case Op::progress: {
                std::size_t reg = n_slots + static_cast<std::size_t>(inst.x);
                if (regs[reg] == pos) break;  // empty loop iteration; cut this path
                set_reg(reg, pos);
                ++pc;
                continue;
            }
            case Op::assert_start:
                if (pos == 0) {
                    ++pc;
                    continue;
                }
                break;
            case Op::assert_end:
                if (pos == static_cast<std::int32_t>(len)) {
                    ++pc;
                    continue;
                }
                break;
            case Op::assert_word:
                if (word_at(pos - 1) != word_at(pos)) {
                    ++pc;
                    continue;
                }
                break;
            case Op::assert_non_word:
                if (word_at(pos - 1) == word_at(pos)) {
                    ++pc;
                    continue;
                }
                break;
            case Op::match:
                if (pos == static_cast<std::int32_t>(len)) {
                    out.matched = true;
                    if (captures) {
                        captures->clear();
                        captures->reserve(static_cast<std::size_t>(group_count_));
                        for (int g = 1; g <= group_count_; ++g) {
                            std::int32_t s = regs[static_cast<std::size_t>(2 * g)];
                            std::int32_t e = regs[static_cast<std::size_t>(2 * g + 1)];
                            if (s >= 0 && e >= s) {
                                captures->emplace_back(line.substr(static_cast<std::size_t>(s),
                                                                   static_cast<std::size_t>(e - s)));
                            } else {
                                captures->emplace_back();
                            }
                        }
                    }
                    return out;
                }
                break;
        }
        if (!backtrack()) return out;
    }
}

bool Regex::matches(std::string_view line) const {
    std::int64_t budget = std::numeric_limits<std::int64_t>::max();
    return full_match(line, nullptr, budget).matched;
}

}  // namespace schemacoder
