#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace bptd {

/// Ordered label set with a label -> contiguous 0-based index bijection.
class Vocabulary {
  public:
    /// Index of `label`, inserting it at the end if unseen.
    int intern(const std::string& label);

    /// Index of `label`, or nullopt if unknown.
    std::optional<int> lookup(const std::string& label) const;

    const std::string& label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }
    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }

    /// Reorder labels lexicographically; returns old index -> new index.
    std::vector<int> canonicalize();

  private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

/// One "(i -a-> j, t)" record with resolved indices.
struct EventToken {
    std::uint32_t sender = 0;
    std::uint32_t receiver = 0;
    std::uint32_t action = 0;
    std::uint32_t time = 0;
};

enum class QuadClass { Neutral, VerbalCoop, MaterialCoop, VerbalConflict, MaterialConflict };

/// CAMEO top-level QuadClass for action codes 1..20. Code 16 is assigned to
/// Material Conflict.
QuadClass quadclass_of_action(int action_code);
const char* quadclass_name(QuadClass q);

enum class TimeBinning {
    Monthly,      // "YYYY-MM" (or longer) timestamps binned by calendar month
    Integer,      // pass-through pre-binned 0-based time steps
};

struct ParseOptions {
    TimeBinning binning = TimeBinning::Monthly;
    /// Anchor month "YYYY-MM" mapped to step 0; if empty, the earliest month seen.
    std::string anchor_month;
    bool strict = false;              // malformed line: abort instead of skip
    bool keep_self_loops = false;     // diagnostics only; fitting requires i != j
    bool canonicalize_vocab = false;  // lexicographic country/action order
};

struct IngestReport {
    std::int64_t lines = 0;
    std::int64_t parsed = 0;
    std::int64_t self_loops = 0;
    std::int64_t malformed = 0;
    std::int64_t comments = 0;
};

struct ParsedEvents {
    Vocabulary countries;
    Vocabulary actions;
    std::vector<EventToken> tokens;
    std::uint32_t num_time_steps = 0;
    IngestReport report;
};

/// Parse a UTF-8 TSV event log: sender, receiver, action code (1..20), time.
/// '#' lines are comments. Vocabularies are built in first-appearance order.
/// Throws on empty input, out-of-range action codes, or (strict) malformed lines.
ParsedEvents parse_events(std::istream& in, const ParseOptions& options = {});
ParsedEvents parse_events_file(const std::string& path, const ParseOptions& options = {});

/// Sparse four-mode count tensor over sender x receiver x action x time.
class CountTensor {
  public:
    CountTensor() = default;
    CountTensor(int V, int A, int T) : V_(V), A_(A), T_(T) {}

    int num_countries() const { return V_; }
    int num_actions() const { return A_; }
    int num_steps() const { return T_; }
    std::int64_t total() const { return total_; }

    void add(std::uint32_t i, std::uint32_t j, std::uint32_t a, std::uint32_t t, std::int64_t count = 1);
    std::int64_t count(std::uint32_t i, std::uint32_t j, std::uint32_t a, std::uint32_t t) const;
    std::size_t num_entries() const { return entries_.size(); }

    struct Entry {
        std::uint32_t i, j, a, t;
        std::int64_t count;
    };

    /// Nonzero entries in sorted key order (deterministic exports).
    std::vector<Entry> sorted_entries() const;

    /// Weighted multinetwork snapshot at time t: nonzero (i, j, a, weight).
    std::vector<Entry> snapshot(std::uint32_t t) const;

    /// Canonical sorted-key TSV dump: "i\tj\ta\tt\tcount" with a dims header.
    void dump_tsv(std::ostream& out) const;
    static CountTensor load_tsv(std::istream& in);
    static CountTensor load_tsv_file(const std::string& path);

  private:
    static std::uint64_t pack(std::uint32_t i, std::uint32_t j, std::uint32_t a, std::uint32_t t);

    int V_ = 0, A_ = 0, T_ = 0;
    std::int64_t total_ = 0;
    std::unordered_map<std::uint64_t, std::int64_t> entries_;
};

/// Aggregate tokens into a count tensor. Throws if an index exceeds dims.
CountTensor build_tensor(const std::vector<EventToken>& tokens, int V, int A, int T);

}  // namespace bptd
