#include "auditcopilot/ledger.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace auditcopilot {
namespace {

constexpr std::array<const char*, 12> kColumns = {
    "entry_id", "posting_id", "posting_date", "posting_time", "transaction_date", "cd_flag",
    "amount",   "currency",   "tax_rate",     "account_id",   "user_id",          "memo"};

// RFC-4180 record reader: quoted fields may contain commas, escaped quotes
// and line breaks. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, size_t& line_no) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;

    std::string field;
    bool in_quotes = false;
    bool any = false;
    while (c != EOF) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                int next = in.get();
                if (next == '"') {
                    field.push_back('"');
                } else {
                    in_quotes = false;
                    c = next;
                    continue;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(static_cast<char>(c));
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            // swallow; handled with the following '\n'
        } else if (c == '\n') {
            ++line_no;
            break;
        } else {
            field.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    if (in_quotes) throw MalformedRowError(line_no, "unterminated quoted field");
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

std::string csv_quote(const std::string& field) {
    bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::string format_tax_rate(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", rate);
    return buf;
}

JournalEntry entry_from_fields(const std::map<std::string, std::string>& cells, size_t line) {
    auto get = [&](const char* name) -> const std::string& {
        static const std::string empty;
        auto it = cells.find(name);
        return it == cells.end() ? empty : it->second;
    };

    JournalEntry e;
    e.entry_id = get("entry_id");
    if (e.entry_id.empty()) throw MalformedRowError(line, "empty entry_id");
    e.posting_id = get("posting_id");
    if (e.posting_id.empty()) throw MalformedRowError(line, "empty posting_id");

    try {
        e.posting_date = parse_date(get("posting_date"));
    } catch (const std::exception& ex) {
        throw MalformedRowError(line, std::string("posting_date: ") + ex.what());
    }
    try {
        e.transaction_date = parse_date(get("transaction_date"));
    } catch (const std::exception& ex) {
        throw MalformedRowError(line, std::string("transaction_date: ") + ex.what());
    }
    if (const std::string& t = get("posting_time"); !t.empty()) {
        try {
            e.posting_time = parse_time_minutes(t);
        } catch (const std::exception& ex) {
            throw MalformedRowError(line, std::string("posting_time: ") + ex.what());
        }
    }

    const std::string& cd = get("cd_flag");
    if (cd == "D") e.cd_flag = CdFlag::Debit;
    else if (cd == "C") e.cd_flag = CdFlag::Credit;
    else throw MalformedRowError(line, "cd_flag must be D or C, got '" + cd + "'");

    try {
        e.amount_cents = parse_amount_cents(get("amount"));
    } catch (const std::exception& ex) {
        throw MalformedRowError(line, std::string("amount: ") + ex.what());
    }
    if (e.amount_cents < 0)
        throw MalformedRowError(line, "amount must be non-negative; sign belongs in cd_flag");

    e.currency = get("currency");
    if (const std::string& t = get("tax_rate"); !t.empty()) {
        try {
            size_t pos = 0;
            double rate = std::stod(t, &pos);
            if (pos != t.size()) throw std::invalid_argument("trailing characters");
            if (rate < 0.0 || rate > 100.0) throw std::invalid_argument("outside [0, 100]");
            e.tax_rate = rate;
        } catch (const std::exception& ex) {
            throw MalformedRowError(line, std::string("tax_rate: ") + ex.what());
        }
    }
    e.account_id = get("account_id");
    e.user_id = get("user_id");
    e.memo = get("memo");
    return e;
}

Dataset finalize(std::vector<JournalEntry> entries) {
    Dataset ds;
    ds.entries = std::move(entries);
    ds.rebuild_groups();
    return ds;
}

Dataset load_csv(const std::string& path, const LoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    size_t line_no = 1;
    std::vector<std::string> header;
    if (!read_csv_record(in, header, line_no))
        return finalize({});  // empty file: zero entries

    std::vector<int> column_of(header.size(), -1);
    std::set<std::string> seen;
    for (size_t i = 0; i < header.size(); ++i) {
        auto it = std::find_if(kColumns.begin(), kColumns.end(),
                               [&](const char* c) { return header[i] == c; });
        if (it == kColumns.end()) {
            if (opts.strict) throw UnknownColumnError(header[i]);
            continue;  // lenient: ignore the column
        }
        column_of[i] = static_cast<int>(it - kColumns.begin());
        seen.insert(header[i]);
    }
    for (const char* c : kColumns)
        if (!seen.count(c)) throw MalformedRowError(1, std::string("missing column '") + c + "'");

    std::vector<JournalEntry> entries;
    std::set<std::string> ids;
    std::vector<std::string> fields;
    size_t record_line = line_no;
    while (read_csv_record(in, fields, line_no)) {
        if (fields.size() == 1 && fields[0].empty()) {
            record_line = line_no;
            continue;  // blank line
        }
        if (fields.size() != header.size())
            throw MalformedRowError(record_line, "expected " + std::to_string(header.size()) +
                                                     " fields, got " + std::to_string(fields.size()));
        std::map<std::string, std::string> cells;
        for (size_t i = 0; i < fields.size(); ++i)
            if (column_of[i] >= 0) cells[kColumns[column_of[i]]] = fields[i];
        JournalEntry e = entry_from_fields(cells, record_line);
        if (!ids.insert(e.entry_id).second) throw DuplicateEntryIdError(record_line, e.entry_id);
        entries.push_back(std::move(e));
        record_line = line_no;
    }
    return finalize(std::move(entries));
}

Dataset load_jsonl(const std::string& path, const LoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    std::vector<JournalEntry> entries;
    std::set<std::string> ids;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const std::exception& ex) {
            throw MalformedRowError(line_no, std::string("invalid JSON: ") + ex.what());
        }
        if (!obj.is_object()) throw MalformedRowError(line_no, "expected a JSON object");

        std::map<std::string, std::string> cells;
        for (auto& [key, value] : obj.items()) {
            bool known = std::find_if(kColumns.begin(), kColumns.end(), [&](const char* c) {
                             return key == c;
                         }) != kColumns.end();
            if (!known) {
                if (opts.strict) throw UnknownColumnError(key);
                continue;
            }
            if (value.is_null()) continue;
            if (value.is_string()) cells[key] = value.get<std::string>();
            else if (key == "amount" && value.is_number())
                cells[key] = format_cents(static_cast<int64_t>(std::llround(value.get<double>() * 100.0)));
            else if (key == "tax_rate" && value.is_number())
                cells[key] = format_tax_rate(value.get<double>());
            else
                throw MalformedRowError(line_no, "field '" + key + "' has unexpected type");
        }
        for (const char* required : {"entry_id", "posting_id", "posting_date", "transaction_date",
                                     "cd_flag", "amount", "currency", "account_id", "user_id"})
            if (!cells.count(required))
                throw MalformedRowError(line_no, std::string("missing field '") + required + "'");
        if (!cells.count("memo")) cells["memo"] = "";

        JournalEntry e = entry_from_fields(cells, line_no);
        if (!ids.insert(e.entry_id).second) throw DuplicateEntryIdError(line_no, e.entry_id);
        entries.push_back(std::move(e));
    }
    return finalize(std::move(entries));
}

std::string entry_to_jsonl(const JournalEntry& e) {
    std::ostringstream out;
    out << "{\"entry_id\":\"" << json_escape(e.entry_id) << "\""
        << ",\"posting_id\":\"" << json_escape(e.posting_id) << "\""
        << ",\"posting_date\":\"" << format_date(e.posting_date) << "\"";
    if (e.posting_time) out << ",\"posting_time\":\"" << format_time_minutes(*e.posting_time) << "\"";
    else out << ",\"posting_time\":null";
    out << ",\"transaction_date\":\"" << format_date(e.transaction_date) << "\""
        << ",\"cd_flag\":\"" << cd_flag_char(e.cd_flag) << "\""
        << ",\"amount\":" << format_cents(e.amount_cents)
        << ",\"currency\":\"" << json_escape(e.currency) << "\"";
    if (e.tax_rate) out << ",\"tax_rate\":" << format_tax_rate(*e.tax_rate);
    else out << ",\"tax_rate\":null";
    out << ",\"account_id\":\"" << json_escape(e.account_id) << "\""
        << ",\"user_id\":\"" << json_escape(e.user_id) << "\""
        << ",\"memo\":\"" << json_escape(e.memo) << "\"}";
    return out.str();
}

}  // namespace

std::string json_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (unsigned char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    return out;
}

void Dataset::rebuild_groups() { groups = group_by_posting(entries); }

std::map<std::string, PostingGroup> group_by_posting(const std::vector<JournalEntry>& entries) {
    std::map<std::string, PostingGroup> groups;
    for (const auto& e : entries) {
        PostingGroup& g = groups[e.posting_id];
        if (g.entries.empty()) g.posting_id = e.posting_id;
        if (e.cd_flag == CdFlag::Debit) g.debit_total_cents += e.amount_cents;
        else g.credit_total_cents += e.amount_cents;
        g.entries.push_back(e);
    }
    return groups;
}

Dataset load_dataset(const std::string& path, LedgerFormat format, const LoadOptions& opts) {
    return format == LedgerFormat::Csv ? load_csv(path, opts) : load_jsonl(path, opts);
}

void save_dataset(const Dataset& dataset, const std::string& path, LedgerFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);

    if (format == LedgerFormat::Csv) {
        for (size_t i = 0; i < kColumns.size(); ++i)
            out << (i ? "," : "") << kColumns[i];
        out << "\n";
        for (const auto& e : dataset.entries) {
            out << csv_quote(e.entry_id) << ',' << csv_quote(e.posting_id) << ','
                << format_date(e.posting_date) << ','
                << (e.posting_time ? format_time_minutes(*e.posting_time) : "") << ','
                << format_date(e.transaction_date) << ',' << cd_flag_char(e.cd_flag) << ','
                << format_cents(e.amount_cents) << ',' << csv_quote(e.currency) << ','
                << (e.tax_rate ? format_tax_rate(*e.tax_rate) : "") << ','
                << csv_quote(e.account_id) << ',' << csv_quote(e.user_id) << ','
                << csv_quote(e.memo) << "\n";
        }
    } else {
        for (const auto& e : dataset.entries) out << entry_to_jsonl(e) << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

void write_report(const nlohmann::json& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << report.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

void save_labels(const std::vector<LabelRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "posting_id,label,archetypes\n";
    for (const auto& row : rows) {
        std::string joined;
        for (size_t i = 0; i < row.archetypes.size(); ++i) {
            if (i) joined += ";";
            joined += row.archetypes[i];
        }
        out << csv_quote(row.posting_id) << ',' << row.label << ',' << csv_quote(joined) << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<LabelRow> load_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    size_t line_no = 1;
    std::vector<std::string> fields;
    if (!read_csv_record(in, fields, line_no)) return {};
    if (fields.size() < 2 || fields[0] != "posting_id" || fields[1] != "label")
        throw MalformedRowError(1, "labels file must start with posting_id,label[,archetypes]");

    std::vector<LabelRow> rows;
    size_t record_line = line_no;
    while (read_csv_record(in, fields, line_no)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() < 2) throw MalformedRowError(record_line, "expected posting_id,label");
        LabelRow row;
        row.posting_id = fields[0];
        if (fields[1] == "0") row.label = 0;
        else if (fields[1] == "1") row.label = 1;
        else throw MalformedRowError(record_line, "label must be 0 or 1, got '" + fields[1] + "'");
        if (fields.size() > 2 && !fields[2].empty()) {
            std::string token;
            std::istringstream ss(fields[2]);
            while (std::getline(ss, token, ';'))
                if (!token.empty()) row.archetypes.push_back(token);
        }
        rows.push_back(std::move(row));
        record_line = line_no;
    }
    return rows;
}

}  // namespace auditcopilot
