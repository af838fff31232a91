#include "hailgauge/csv.hpp"

#include "hailgauge/types.hpp"

namespace hailgauge::csv {

bool read_record(std::istream& in, Record& out, std::size_t& line) {
    out.clear();
    int c = in.get();
    if (c == std::char_traits<char>::eof())
        return false;
    ++line;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    while (true) {
        if (c == std::char_traits<char>::eof()) {
            if (quoted)
                throw Error("unterminated quoted field starting near line " + std::to_string(line));
            out.push_back(std::move(field));
            return true;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n')
                    ++line;
                field.push_back(ch);
            }
        } else if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (ch == ',') {
            out.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && in.peek() == '\n')
                in.get();
            out.push_back(std::move(field));
            return true;
        } else {
            field.push_back(ch);
            field_started = true;
        }
        c = in.get();
    }
}

std::vector<Record> read_all(std::istream& in) {
    std::vector<Record> rows;
    Record rec;
    std::size_t line = 0;
    while (read_record(in, rec, line))
        rows.push_back(rec);
    return rows;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += "\"\"";
        else
            out += c;
    }
    out += '"';
    return out;
}

} // namespace hailgauge::csv
