#include "bptd/event_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bptd {

int Vocabulary::intern(const std::string& label) {
    auto it = index_.find(label);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(labels_.size());
    labels_.push_back(label);
    index_.emplace(label, id);
    return id;
}

std::optional<int> Vocabulary::lookup(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<int> Vocabulary::canonicalize() {
    std::vector<int> order(labels_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return labels_[static_cast<std::size_t>(a)] < labels_[static_cast<std::size_t>(b)]; });
    std::vector<int> old_to_new(labels_.size());
    std::vector<std::string> sorted(labels_.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        old_to_new[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos);
        sorted[pos] = labels_[static_cast<std::size_t>(order[pos])];
    }
    labels_ = std::move(sorted);
    index_.clear();
    for (std::size_t k = 0; k < labels_.size(); ++k) index_.emplace(labels_[k], static_cast<int>(k));
    return old_to_new;
}

QuadClass quadclass_of_action(int action_code) {
    if (action_code < 1 || action_code > 20) {
        throw std::out_of_range("quadclass: action code must be in 1..20");
    }
    if (action_code == 1) return QuadClass::Neutral;
    if (action_code <= 5) return QuadClass::VerbalCoop;
    if (action_code <= 7) return QuadClass::MaterialCoop;
    if (action_code <= 15) return QuadClass::VerbalConflict;
    return QuadClass::MaterialConflict;
}

const char* quadclass_name(QuadClass q) {
    switch (q) {
        case QuadClass::Neutral: return "Neutral";
        case QuadClass::VerbalCoop: return "VerbalCoop";
        case QuadClass::MaterialCoop: return "MaterialCoop";
        case QuadClass::VerbalConflict: return "VerbalConflict";
        case QuadClass::MaterialConflict: return "MaterialConflict";
    }
    return "?";
}

namespace {

bool parse_int(const std::string& s, long long& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

// "YYYY-MM" (longer suffixes like "-DD" ignored) -> year*12 + month-1.
bool parse_month(const std::string& s, long long& out) {
    if (s.size() < 7 || s[4] != '-') return false;
    long long year = 0, month = 0;
    auto [p1, e1] = std::from_chars(s.data(), s.data() + 4, year);
    auto [p2, e2] = std::from_chars(s.data() + 5, s.data() + 7, month);
    if (e1 != std::errc() || e2 != std::errc() || p1 != s.data() + 4 || p2 != s.data() + 7) return false;
    if (month < 1 || month > 12) return false;
    out = year * 12 + (month - 1);
    return true;
}

std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

}  // namespace

ParsedEvents parse_events(std::istream& in, const ParseOptions& options) {
    ParsedEvents out;
    struct RawToken {
        int i, j, a;
        long long time_key;
    };
    std::vector<RawToken> raw;
    std::string line;
    bool have_anchor = !options.anchor_month.empty();
    long long anchor = 0;
    if (have_anchor && options.binning == TimeBinning::Monthly) {
        if (!parse_month(options.anchor_month, anchor)) {
            throw std::invalid_argument("parse_events: bad anchor month '" + options.anchor_month + "'");
        }
    }
    long long min_key = 0;
    bool any_key = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++out.report.lines;
        if (line.empty() || line[0] == '#') {
            ++out.report.comments;
            continue;
        }
        auto fields = split_tsv(line);
        long long action_code = 0;
        long long time_key = 0;
        bool ok = fields.size() == 4 && !fields[0].empty() && !fields[1].empty() &&
                  parse_int(fields[2], action_code);
        if (ok) {
            if (options.binning == TimeBinning::Monthly) {
                ok = parse_month(fields[3], time_key);
            } else {
                ok = parse_int(fields[3], time_key) && time_key >= 0;
            }
        }
        if (!ok) {
            if (options.strict) {
                throw std::runtime_error("parse_events: malformed line " + std::to_string(out.report.lines));
            }
            ++out.report.malformed;
            continue;
        }
        if (action_code < 1 || action_code > 20) {
            throw std::out_of_range("parse_events: action code " + std::to_string(action_code) +
                                    " outside 1..20 at line " + std::to_string(out.report.lines));
        }
        if (fields[0] == fields[1] && !options.keep_self_loops) {
            ++out.report.self_loops;
            continue;
        }
        int i = out.countries.intern(fields[0]);
        int j = out.countries.intern(fields[1]);
        int a = out.actions.intern(fields[2]);
        raw.push_back({i, j, a, time_key});
        if (!any_key || time_key < min_key) {
            min_key = time_key;
            any_key = true;
        }
        ++out.report.parsed;
    }
    if (raw.empty()) throw std::runtime_error("parse_events: no valid event records");

    long long base = 0;
    if (options.binning == TimeBinning::Monthly) {
        base = have_anchor ? anchor : min_key;
    }
    std::uint32_t max_t = 0;
    out.tokens.reserve(raw.size());
    for (const auto& r : raw) {
        long long t = r.time_key - base;
        if (t < 0) {
            throw std::runtime_error("parse_events: timestamp precedes anchor month");
        }
        EventToken tok{static_cast<std::uint32_t>(r.i), static_cast<std::uint32_t>(r.j),
                       static_cast<std::uint32_t>(r.a), static_cast<std::uint32_t>(t)};
        max_t = std::max(max_t, tok.time);
        out.tokens.push_back(tok);
    }
    out.num_time_steps = max_t + 1;

    if (options.canonicalize_vocab) {
        auto cmap = out.countries.canonicalize();
        auto amap = out.actions.canonicalize();
        for (auto& tok : out.tokens) {
            tok.sender = static_cast<std::uint32_t>(cmap[tok.sender]);
            tok.receiver = static_cast<std::uint32_t>(cmap[tok.receiver]);
            tok.action = static_cast<std::uint32_t>(amap[tok.action]);
        }
    }
    return out;
}

ParsedEvents parse_events_file(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_events: cannot open " + path);
    return parse_events(in, options);
}

std::uint64_t CountTensor::pack(std::uint32_t i, std::uint32_t j, std::uint32_t a, std::uint32_t t) {
    return (static_cast<std::uint64_t>(i) << 48) | (static_cast<std::uint64_t>(j) << 32) |
           (static_cast<std::uint64_t>(a) << 16) | static_cast<std::uint64_t>(t);
}

void CountTensor::add(std::uint32_t i, std::uint32_t j, std::uint32_t a, std::uint32_t t, std::int64_t count) {
    if (static_cast<int>(i) >= V_ || static_cast<int>(j) >= V_ || static_cast<int>(a) >= A_ ||
        static_cast<int>(t) >= T_) {
        throw std::out_of_range("CountTensor::add: index out of bounds");
    }
    if (count <= 0) throw std::invalid_argument("CountTensor::add: count must be positive");
    if (i >= 65536 || j >= 65536 || a >= 65536 || t >= 65536) {
        throw std::out_of_range("CountTensor::add: index exceeds packed key width");
    }
    entries_[pack(i, j, a, t)] += count;
    total_ += count;
}

std::int64_t CountTensor::count(std::uint32_t i, std::uint32_t j, std::uint32_t a, std::uint32_t t) const {
    auto it = entries_.find(pack(i, j, a, t));
    return it == entries_.end() ? 0 : it->second;
}

std::vector<CountTensor::Entry> CountTensor::sorted_entries() const {
    std::vector<std::pair<std::uint64_t, std::int64_t>> kv(entries_.begin(), entries_.end());
    std::sort(kv.begin(), kv.end());
    std::vector<Entry> out;
    out.reserve(kv.size());
    for (const auto& [key, count] : kv) {
        out.push_back({static_cast<std::uint32_t>(key >> 48), static_cast<std::uint32_t>((key >> 32) & 0xFFFF),
                       static_cast<std::uint32_t>((key >> 16) & 0xFFFF), static_cast<std::uint32_t>(key & 0xFFFF),
                       count});
    }
    return out;
}

std::vector<CountTensor::Entry> CountTensor::snapshot(std::uint32_t t) const {
    if (static_cast<int>(t) >= T_) throw std::out_of_range("CountTensor::snapshot: t out of range");
    std::vector<Entry> out;
    for (const auto& e : sorted_entries()) {
        if (e.t == t) out.push_back(e);
    }
    return out;
}

void CountTensor::dump_tsv(std::ostream& out) const {
    out << "# dims\t" << V_ << '\t' << A_ << '\t' << T_ << '\n';
    for (const auto& e : sorted_entries()) {
        out << e.i << '\t' << e.j << '\t' << e.a << '\t' << e.t << '\t' << e.count << '\n';
    }
}

CountTensor CountTensor::load_tsv(std::istream& in) {
    std::string line;
    int V = -1, A = -1, T = -1;
    struct Row {
        std::uint32_t i, j, a, t;
        std::int64_t count;
    };
    std::vector<Row> rows;
    std::uint32_t max_i = 0, max_a = 0, max_t = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto fields = split_tsv(line);
            if (fields.size() == 4 && fields[0] == "# dims") {
                long long v = 0, a = 0, t = 0;
                if (parse_int(fields[1], v) && parse_int(fields[2], a) && parse_int(fields[3], t)) {
                    V = static_cast<int>(v);
                    A = static_cast<int>(a);
                    T = static_cast<int>(t);
                }
            }
            continue;
        }
        auto fields = split_tsv(line);
        long long i = 0, j = 0, a = 0, t = 0, c = 0;
        if (fields.size() != 5 || !parse_int(fields[0], i) || !parse_int(fields[1], j) ||
            !parse_int(fields[2], a) || !parse_int(fields[3], t) || !parse_int(fields[4], c) || c <= 0) {
            throw std::runtime_error("CountTensor::load_tsv: malformed row '" + line + "'");
        }
        Row r{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(a),
              static_cast<std::uint32_t>(t), c};
        rows.push_back(r);
        max_i = std::max({max_i, r.i, r.j});
        max_a = std::max(max_a, r.a);
        max_t = std::max(max_t, r.t);
    }
    if (V < 0) {
        V = static_cast<int>(max_i) + 1;
        A = static_cast<int>(max_a) + 1;
        T = static_cast<int>(max_t) + 1;
    }
    CountTensor tensor(V, A, T);
    for (const auto& r : rows) tensor.add(r.i, r.j, r.a, r.t, r.count);
    return tensor;
}

CountTensor CountTensor::load_tsv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("CountTensor: cannot open " + path);
    return load_tsv(in);
}

CountTensor build_tensor(const std::vector<EventToken>& tokens, int V, int A, int T) {
    CountTensor tensor(V, A, T);
    for (const auto& tok : tokens) {
        tensor.add(tok.sender, tok.receiver, tok.action, tok.time);
    }
    return tensor;
}

}  // namespace bptd
