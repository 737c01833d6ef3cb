#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace urtf::sel {

// (AssoName: InfoSpan)
struct AssoGroup {
    std::string asso_name;
    std::string info_span;

    bool operator==(const AssoGroup&) const = default;
};

// (SpotName: InfoSpan (AssoName: InfoSpan)*)
struct SpotGroup {
    std::string spot_name;
    std::string info_span;
    std::vector<AssoGroup> assos;

    bool operator==(const SpotGroup&) const = default;
};

// Ordered tree of spot groups. Group order is significant; duplicates are kept.
struct SelRecord {
    std::vector<SpotGroup> groups;

    bool operator==(const SelRecord&) const = default;
};

struct Schema {
    std::set<std::string> spots;
    std::set<std::string> assos;

    bool operator==(const Schema&) const = default;
};

enum class ParseFault {
    UnbalancedParens,
    MissingColon,
    EmptyName,
    NestingTooDeep,
};

class ParseError : public std::runtime_error {
public:
    ParseError(ParseFault fault, std::size_t offset, const std::string& what);
    ParseFault fault() const { return fault_; }
    // byte offset into the input where the fault was detected
    std::size_t offset() const { return offset_; }

private:
    ParseFault fault_;
    std::size_t offset_;
};

class InvalidName : public std::runtime_error {
public:
    explicit InvalidName(const std::string& name);
};

struct Violation {
    enum class Kind { UnknownSpot, UnknownAsso };
    Kind kind;
    std::string name;

    bool operator==(const Violation&) const = default;
};

// True when the string is usable as a SpotName/AssoName: nonempty, no '(', ')' or ':'.
bool is_valid_name(const std::string& name);

// Parses either the wrapped form "((A: x)(B: y))" or the bare form "(A: x)(B: y)".
// Whitespace between tokens is insignificant; names and spans are trimmed.
SelRecord parse_sel(const std::string& text);

// Canonical form: outer wrapping parens, single space after each colon,
// no other inserted whitespace. parse_sel(linearize_sel(r)) == r.
std::string linearize_sel(const SelRecord& record);

// One violation per name not covered by the schema, in document order.
std::vector<Violation> validate_record(const SelRecord& record, const Schema& schema);

// Union of all spot and asso names in the record.
std::set<std::string> extract_class_set(const SelRecord& record);

}  // namespace urtf::sel
