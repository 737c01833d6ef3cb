#include "urtf/sel.hpp"

#include <cctype>
#include <sstream>

namespace urtf::sel {

namespace {

const char* fault_name(ParseFault f) {
    switch (f) {
        case ParseFault::UnbalancedParens: return "UnbalancedParens";
        case ParseFault::MissingColon: return "MissingColon";
        case ParseFault::EmptyName: return "EmptyName";
        case ParseFault::NestingTooDeep: return "NestingTooDeep";
    }
    return "ParseError";
}

std::string fault_message(ParseFault f, std::size_t offset) {
    std::ostringstream os;
    os << fault_name(f) << " at byte " << offset;
    return os.str();
}

[[noreturn]] void fail(ParseFault f, std::size_t offset) {
    throw ParseError(f, offset, fault_message(f, offset));
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool at_end() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() {
        skip_ws();
        return text[pos];
    }
};

// Reads "Name ':'" starting after an already-consumed '('. Leaves pos after the colon.
std::string parse_name(Cursor& c) {
    c.skip_ws();
    std::size_t name_start = c.pos;
    while (c.pos < c.text.size()) {
        char ch = c.text[c.pos];
        if (ch == ':') {
            std::string name = trim(c.text.substr(name_start, c.pos - name_start));
            if (name.empty()) fail(ParseFault::EmptyName, name_start);
            ++c.pos;
            return name;
        }
        if (ch == '(' || ch == ')') fail(ParseFault::MissingColon, c.pos);
        ++c.pos;
    }
    fail(ParseFault::MissingColon, c.text.size());
}

// Span text runs until the next '(' or ')'.
std::string parse_span(Cursor& c) {
    std::size_t start = c.pos;
    while (c.pos < c.text.size() && c.text[c.pos] != '(' && c.text[c.pos] != ')') ++c.pos;
    return trim(c.text.substr(start, c.pos - start));
}

AssoGroup parse_asso(Cursor& c) {
    // caller consumed '('
    AssoGroup asso;
    asso.asso_name = parse_name(c);
    asso.info_span = parse_span(c);
    if (c.pos >= c.text.size()) fail(ParseFault::UnbalancedParens, c.text.size());
    if (c.text[c.pos] == '(') fail(ParseFault::NestingTooDeep, c.pos);
    ++c.pos;  // ')'
    return asso;
}

SpotGroup parse_spot(Cursor& c) {
    // caller consumed '('
    SpotGroup spot;
    spot.spot_name = parse_name(c);
    spot.info_span = parse_span(c);
    while (c.pos < c.text.size() && c.text[c.pos] == '(') {
        ++c.pos;
        spot.assos.push_back(parse_asso(c));
        // trailing span text after an asso group folds into nothing; skip stray ws
        while (c.pos < c.text.size() && std::isspace(static_cast<unsigned char>(c.text[c.pos])))
            ++c.pos;
    }
    if (c.pos >= c.text.size()) fail(ParseFault::UnbalancedParens, c.text.size());
    if (c.text[c.pos] != ')') fail(ParseFault::UnbalancedParens, c.pos);
    ++c.pos;
    return spot;
}

std::vector<SpotGroup> parse_groups(Cursor& c) {
    std::vector<SpotGroup> groups;
    while (!c.at_end()) {
        if (c.peek() != '(') fail(ParseFault::UnbalancedParens, c.pos);
        ++c.pos;
        groups.push_back(parse_spot(c));
    }
    return groups;
}

// Offset of the paren matching text[open], or npos.
std::size_t matching_close(const std::string& text, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        if (text[i] == ')' && --depth == 0) return i;
    }
    return std::string::npos;
}

void check_name(const std::string& name) {
    if (!is_valid_name(name)) throw InvalidName(name);
}

}  // namespace

ParseError::ParseError(ParseFault fault, std::size_t offset, const std::string& what)
    : std::runtime_error(what), fault_(fault), offset_(offset) {}

InvalidName::InvalidName(const std::string& name)
    : std::runtime_error("invalid class name: '" + name + "'") {}

bool is_valid_name(const std::string& name) {
    if (name.empty()) return false;
    return name.find_first_of("():") == std::string::npos;
}

SelRecord parse_sel(const std::string& text) {
    Cursor probe{text};
    if (probe.at_end()) return {};

    int depth = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        if (text[i] == ')' && --depth < 0) fail(ParseFault::UnbalancedParens, i);
    }
    if (depth != 0) fail(ParseFault::UnbalancedParens, text.size());

    std::size_t first = probe.pos;
    bool wrapped = false;
    if (text[first] == '(') {
        std::size_t close = matching_close(text, first);
        if (close != std::string::npos && trim(text.substr(close + 1)).empty()) {
            // The outermost parens are a wrapper when they enclose group parens
            // (or nothing), never a group body, which starts with a name.
            Cursor inner{text, first + 1};
            if (!inner.at_end() && (inner.peek() == '(' || inner.pos == close)) wrapped = true;
            if (inner.at_end()) wrapped = false;  // lone '(' with ws; let group parser fail
        }
    }

    Cursor c{text, first};
    std::vector<SpotGroup> groups;
    if (wrapped) {
        std::size_t close = matching_close(text, first);
        std::string body = text.substr(first + 1, close - first - 1);
        Cursor bc{body};
        try {
            groups = parse_groups(bc);
        } catch (const ParseError& e) {
            fail(e.fault(), e.offset() + first + 1);
        }
    } else {
        groups = parse_groups(c);
    }
    return SelRecord{std::move(groups)};
}

std::string linearize_sel(const SelRecord& record) {
    std::string out = "(";
    for (const auto& spot : record.groups) {
        check_name(spot.spot_name);
        out += "(" + spot.spot_name + ": " + spot.info_span;
        for (const auto& asso : spot.assos) {
            check_name(asso.asso_name);
            out += "(" + asso.asso_name + ": " + asso.info_span + ")";
        }
        out += ")";
    }
    out += ")";
    return out;
}

std::vector<Violation> validate_record(const SelRecord& record, const Schema& schema) {
    std::vector<Violation> out;
    for (const auto& spot : record.groups) {
        if (!schema.spots.contains(spot.spot_name))
            out.push_back({Violation::Kind::UnknownSpot, spot.spot_name});
        for (const auto& asso : spot.assos) {
            if (!schema.assos.contains(asso.asso_name))
                out.push_back({Violation::Kind::UnknownAsso, asso.asso_name});
        }
    }
    return out;
}

std::set<std::string> extract_class_set(const SelRecord& record) {
    std::set<std::string> names;
    for (const auto& spot : record.groups) {
        names.insert(spot.spot_name);
        for (const auto& asso : spot.assos) names.insert(asso.asso_name);
    }
    return names;
}

}  // namespace urtf::sel
