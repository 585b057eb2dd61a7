#include "lucy/eval.hpp"
#include "lucy/errors.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <istream>
#include <sstream>

namespace lucy {

using nlohmann::json;

// ---- shared counts ----

BinaryCounts& BinaryCounts::operator+=(const BinaryCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

PrecisionRecall precision_recall(const BinaryCounts& c) {
    PrecisionRecall pr;
    if (c.tp + c.fp == 0) {
        pr.precision_defined = false;
    } else {
        pr.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn == 0) {
        pr.recall_defined = false;
    } else {
        pr.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    pr.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
    return pr;
}

// ---- function calls ----

FcCounts& FcCounts::operator+=(const FcCounts& o) {
    selection += o.selection;
    selection_correct += o.selection_correct;
    gold_positive += o.gold_positive;
    param_correct += o.param_correct;
    response_correct += o.response_correct;
    overall_correct += o.overall_correct;
    total += o.total;
    return *this;
}

FcCounts fc_counts(std::span<const FcCase> cases) {
    FcCounts c;
    c.total = cases.size();
    for (const FcCase& k : cases) {
        const bool gold_pos = k.gold_tool.has_value();
        const bool pred_pos = k.pred_tool.has_value();
        const bool tool_match = gold_pos && pred_pos && *k.gold_tool == *k.pred_tool;

        if (tool_match) {
            c.selection.tp += 1;
        } else {
            // a wrong tool both misses the gold tool and asserts a spurious one
            if (pred_pos) c.selection.fp += 1;
            if (gold_pos) c.selection.fn += 1;
            if (!gold_pos && !pred_pos) c.selection.tn += 1;
        }
        const bool selection_ok = gold_pos ? tool_match : !pred_pos;
        if (selection_ok) c.selection_correct += 1;

        if (gold_pos) {
            c.gold_positive += 1;
            const bool param_ok = k.param_correct.value_or(false);
            const bool response_ok = k.response_correct.value_or(false);
            if (param_ok) c.param_correct += 1;
            if (response_ok) c.response_correct += 1;
            if (tool_match && param_ok && response_ok) c.overall_correct += 1;
        } else if (!pred_pos) {
            c.overall_correct += 1; // abstention is the whole task on negatives
        }
    }
    return c;
}

FcMetrics fc_metrics_from_counts(const FcCounts& counts) {
    if (counts.total == 0) throw domain_error("fc metrics need at least one case");
    FcMetrics m;
    m.total = counts.total;
    m.gold_positive = counts.gold_positive;
    m.selection_acc =
        static_cast<double>(counts.selection_correct) / static_cast<double>(counts.total);
    m.selection = precision_recall(counts.selection);
    if (counts.gold_positive > 0) {
        m.param_acc = static_cast<double>(counts.param_correct) /
                      static_cast<double>(counts.gold_positive);
        m.response_acc = static_cast<double>(counts.response_correct) /
                         static_cast<double>(counts.gold_positive);
    }
    m.overall_acc =
        static_cast<double>(counts.overall_correct) / static_cast<double>(counts.total);
    return m;
}

FcMetrics fc_metrics(std::span<const FcCase> cases) {
    if (cases.empty()) throw domain_error("fc metrics need at least one case");
    return fc_metrics_from_counts(fc_counts(cases));
}

// ---- rejection ----

BinaryCounts rejection_counts(std::span<const RejectionCase> cases) {
    BinaryCounts c;
    for (const RejectionCase& k : cases) {
        if (k.gold_respond && k.pred_respond) c.tp += 1;
        else if (!k.gold_respond && k.pred_respond) c.fp += 1;
        else if (k.gold_respond && !k.pred_respond) c.fn += 1;
        else c.tn += 1;
    }
    return c;
}

PrecisionRecall rejection_metrics(std::span<const RejectionCase> cases) {
    if (cases.empty()) throw domain_error("rejection metrics need at least one case");
    return precision_recall(rejection_counts(cases));
}

// ---- QA presence ----

QaCounts& QaCounts::operator+=(const QaCounts& o) {
    hits += o.hits;
    total += o.total;
    return *this;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            pending_space = true;
            continue;
        }
        if (std::ispunct(ch)) continue;
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(ch)));
    }
    return out;
}

bool phrase_present(const QaItem& item) {
    const std::string haystack = normalize_text(item.response);
    for (const std::string& answer : item.answers) {
        const std::string needle = normalize_text(answer);
        if (!needle.empty() && haystack.find(needle) != std::string::npos) return true;
    }
    return false;
}

QaCounts qa_counts(std::span<const QaItem> items) {
    QaCounts c;
    c.total = items.size();
    for (const QaItem& item : items)
        if (phrase_present(item)) c.hits += 1;
    return c;
}

double presence_rate(std::span<const QaItem> items) {
    if (items.empty()) throw domain_error("presence rate needs at least one item");
    const QaCounts c = qa_counts(items);
    return static_cast<double>(c.hits) / static_cast<double>(c.total);
}

// ---- WER / CER ----

EditCounts& EditCounts::operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_len += o.ref_len;
    return *this;
}

WerResult edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    struct Cell {
        std::size_t cost = 0;
        EditCounts counts;
    };
    std::vector<Cell> prev(m + 1), cur(m + 1);
    for (std::size_t j = 1; j <= m; ++j) {
        prev[j].cost = j;
        prev[j].counts.insertions = j;
    }
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0].cost = i;
        cur[0].counts = EditCounts{0, 0, i, 0};
        for (std::size_t j = 1; j <= m; ++j) {
            const bool match = ref[i - 1] == hyp[j - 1];
            const std::size_t diag = prev[j - 1].cost + (match ? 0 : 1);
            const std::size_t del = prev[j].cost + 1;
            const std::size_t ins = cur[j - 1].cost + 1;
            // tie order: substitution, then deletion, then insertion
            if (diag <= del && diag <= ins) {
                cur[j].cost = diag;
                cur[j].counts = prev[j - 1].counts;
                if (!match) cur[j].counts.substitutions += 1;
            } else if (del <= ins) {
                cur[j].cost = del;
                cur[j].counts = prev[j].counts;
                cur[j].counts.deletions += 1;
            } else {
                cur[j].cost = ins;
                cur[j].counts = cur[j - 1].counts;
                cur[j].counts.insertions += 1;
            }
        }
        std::swap(prev, cur);
    }
    WerResult r;
    r.counts = prev[m].counts;
    r.counts.ref_len = n;
    if (n > 0) r.rate = static_cast<double>(r.counts.edits()) / static_cast<double>(n);
    return r;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

std::vector<std::string> utf8_codepoints(const std::string& text) {
    std::vector<std::string> cps;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        if (lead < 0x80) len = 1;
        else if ((lead >> 5) == 0x6) len = 2;
        else if ((lead >> 4) == 0xe) len = 3;
        else if ((lead >> 3) == 0x1e) len = 4;
        else throw parse_error("invalid utf-8 lead byte");
        if (i + len > text.size()) throw parse_error("truncated utf-8 sequence");
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(text[i + k]) >> 6) != 0x2)
                throw parse_error("invalid utf-8 continuation byte");
        cps.push_back(text.substr(i, len));
        i += len;
    }
    return cps;
}

WerResult wer(const std::string& ref, const std::string& hyp) {
    return edit_distance(split_words(ref), split_words(hyp));
}

WerResult cer(const std::string& ref, const std::string& hyp) {
    return edit_distance(utf8_codepoints(ref), utf8_codepoints(hyp));
}

std::optional<double> corpus_rate(const EditCounts& merged) {
    if (merged.ref_len == 0) return std::nullopt;
    return static_cast<double>(merged.edits()) / static_cast<double>(merged.ref_len);
}

// ---- emotion ----

LabelMapping default_emotion_mapping() { return {{"Other", "sorry"}}; }

EmotionCounts& EmotionCounts::operator+=(const EmotionCounts& o) {
    for (const auto& [label, count] : o.per_label) {
        per_label[label].correct += count.correct;
        per_label[label].total += count.total;
    }
    return *this;
}

std::size_t EmotionCounts::total() const {
    std::size_t n = 0;
    for (const auto& [label, count] : per_label) n += count.total;
    return n;
}

std::size_t EmotionCounts::correct() const {
    std::size_t n = 0;
    for (const auto& [label, count] : per_label) n += count.correct;
    return n;
}

namespace {

std::string ascii_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

EmotionCounts emotion_counts(std::span<const EmotionCase> cases,
                             const std::vector<std::string>& label_set,
                             const LabelMapping& mapping) {
    EmotionCounts counts;
    for (const EmotionCase& c : cases) {
        if (std::find(label_set.begin(), label_set.end(), c.gold) == label_set.end())
            throw data_error("gold emotion label outside configured set: " + c.gold);
        auto it = mapping.find(c.pred_raw);
        const std::string pred = ascii_lower(it != mapping.end() ? it->second : c.pred_raw);
        LabelCount& bucket = counts.per_label[c.gold];
        bucket.total += 1;
        if (pred == c.gold) bucket.correct += 1;
    }
    return counts;
}

EmotionAccuracy emotion_accuracy(std::span<const EmotionCase> cases,
                                 const std::vector<std::string>& label_set,
                                 const LabelMapping& mapping) {
    EmotionAccuracy acc;
    acc.counts = emotion_counts(cases, label_set, mapping);
    for (const auto& [label, count] : acc.counts.per_label)
        acc.per_label[label] =
            count.total == 0 ? 0.0
                             : static_cast<double>(count.correct) /
                                   static_cast<double>(count.total);
    const std::size_t total = acc.counts.total();
    acc.overall =
        total == 0 ? 0.0 : static_cast<double>(acc.counts.correct()) / static_cast<double>(total);
    return acc;
}

// ---- win rate ----

WinCounts& WinCounts::operator+=(const WinCounts& o) {
    wins += o.wins;
    ties += o.ties;
    losses += o.losses;
    return *this;
}

WinCounts win_counts(std::span<const JudgeVerdict> verdicts) {
    WinCounts c;
    for (const JudgeVerdict& v : verdicts) {
        switch (v.winner) {
            case Winner::candidate: c.wins += 1; break;
            case Winner::tie: c.ties += 1; break;
            case Winner::baseline: c.losses += 1; break;
        }
    }
    return c;
}

double win_rate_from_counts(const WinCounts& c, TiePolicy policy) {
    if (policy == TiePolicy::exclude) {
        const std::size_t decided = c.wins + c.losses;
        if (decided == 0) throw domain_error("win rate undefined: every verdict is a tie");
        return static_cast<double>(c.wins) / static_cast<double>(decided);
    }
    if (c.total() == 0) throw domain_error("win rate needs at least one verdict");
    return (static_cast<double>(c.wins) + 0.5 * static_cast<double>(c.ties)) /
           static_cast<double>(c.total());
}

double win_rate(std::span<const JudgeVerdict> verdicts, TiePolicy policy) {
    if (verdicts.empty()) throw domain_error("win rate needs at least one verdict");
    return win_rate_from_counts(win_counts(verdicts), policy);
}

// ---- JSONL io ----

namespace {

// Applies fn to each non-blank line's parsed object, tagging errors with the line.
template <typename Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error("jsonl line " + std::to_string(line_no) + ": " + e.what(), line);
        }
        try {
            fn(doc);
        } catch (const json::exception& e) {
            throw parse_error("jsonl line " + std::to_string(line_no) + ": " + e.what(), line);
        }
    }
}

std::optional<std::string> optional_string(const json& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    return doc[key].get<std::string>();
}

std::optional<bool> optional_bool(const json& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    return doc[key].get<bool>();
}

} // namespace

std::vector<FcCase> fc_cases_from_jsonl(std::istream& in) {
    std::vector<FcCase> cases;
    for_each_jsonl(in, [&](const json& doc) {
        FcCase c;
        c.id = doc.value("id", "");
        c.gold_tool = optional_string(doc, "gold_tool");
        c.gold_params = doc.value("gold_params", json::object());
        c.pred_tool = optional_string(doc, "pred_tool");
        c.pred_params = doc.value("pred_params", json::object());
        c.param_correct = optional_bool(doc, "param_correct");
        c.response_correct = optional_bool(doc, "response_correct");
        if (c.pred_tool && (!c.param_correct || !c.response_correct))
            throw parse_error("fc case " + c.id +
                              ": judged booleans required when pred_tool is set");
        cases.push_back(std::move(c));
    });
    return cases;
}

std::vector<RejectionCase> rejection_cases_from_jsonl(std::istream& in) {
    std::vector<RejectionCase> cases;
    for_each_jsonl(in, [&](const json& doc) {
        cases.push_back({doc.value("id", ""), doc.at("gold_respond").get<bool>(),
                         doc.at("pred_respond").get<bool>()});
    });
    return cases;
}

std::vector<QaItem> qa_items_from_jsonl(std::istream& in) {
    std::vector<QaItem> items;
    for_each_jsonl(in, [&](const json& doc) {
        QaItem item;
        item.id = doc.value("id", "");
        item.answers = doc.at("answers").get<std::vector<std::string>>();
        item.response = doc.at("response").get<std::string>();
        items.push_back(std::move(item));
    });
    return items;
}

std::vector<WerCase> wer_cases_from_jsonl(std::istream& in) {
    std::vector<WerCase> cases;
    for_each_jsonl(in, [&](const json& doc) {
        cases.push_back({doc.value("id", ""), doc.at("ref").get<std::string>(),
                         doc.at("hyp").get<std::string>()});
    });
    return cases;
}

std::vector<EmotionCase> emotion_cases_from_jsonl(std::istream& in) {
    std::vector<EmotionCase> cases;
    for_each_jsonl(in, [&](const json& doc) {
        cases.push_back({doc.value("id", ""), doc.at("gold").get<std::string>(),
                         doc.at("pred_raw").get<std::string>()});
    });
    return cases;
}

std::vector<JudgeVerdict> verdicts_from_jsonl(std::istream& in) {
    std::vector<JudgeVerdict> verdicts;
    for_each_jsonl(in, [&](const json& doc) {
        const std::string w = doc.at("winner").get<std::string>();
        Winner winner;
        if (w == "candidate") winner = Winner::candidate;
        else if (w == "baseline") winner = Winner::baseline;
        else if (w == "tie") winner = Winner::tie;
        else throw parse_error("unknown winner value: " + w);
        verdicts.push_back({doc.value("id", ""), winner});
    });
    return verdicts;
}

// ---- reports ----

namespace {

// two-column aligned table; values rendered to 4 decimals
std::string format_table(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    std::ostringstream out;
    for (const auto& [k, v] : rows)
        out << std::left << std::setw(static_cast<int>(width + 2)) << k << v << "\n";
    return out.str();
}

std::string fmt4(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << v;
    return out.str();
}

json pr_json(const PrecisionRecall& pr) {
    return json{{"precision", pr.precision},
                {"recall", pr.recall},
                {"f1", pr.f1},
                {"precision_defined", pr.precision_defined},
                {"recall_defined", pr.recall_defined}};
}

} // namespace

json fc_report(const FcMetrics& m) {
    json selection = pr_json(m.selection);
    selection["accuracy"] = m.selection_acc;
    return json{{"selection", selection},
                {"param_accuracy", m.param_acc},
                {"response_accuracy", m.response_acc},
                {"overall_accuracy", m.overall_acc},
                {"cases", m.total},
                {"gold_positive", m.gold_positive}};
}

json rejection_report(const PrecisionRecall& pr, const BinaryCounts& c) {
    json out = pr_json(pr);
    out["counts"] = json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
    return out;
}

json qa_report(const QaCounts& c) {
    const double rate =
        c.total == 0 ? 0.0 : static_cast<double>(c.hits) / static_cast<double>(c.total);
    return json{{"presence_rate", rate}, {"hits", c.hits}, {"items", c.total}};
}

namespace {

json edit_json(const EditCounts& c) {
    json out{{"substitutions", c.substitutions},
             {"insertions", c.insertions},
             {"deletions", c.deletions},
             {"ref_len", c.ref_len}};
    const auto rate = corpus_rate(c);
    out["rate"] = rate ? json(*rate) : json(nullptr);
    return out;
}

} // namespace

json wer_report(const EditCounts& words, const EditCounts& chars) {
    return json{{"wer", edit_json(words)}, {"cer", edit_json(chars)}};
}

json emotion_report(const EmotionAccuracy& acc) {
    json per_label = json::object();
    for (const auto& [label, rate] : acc.per_label) {
        const LabelCount& c = acc.counts.per_label.at(label);
        per_label[label] = json{{"accuracy", rate}, {"correct", c.correct}, {"total", c.total}};
    }
    return json{{"overall", acc.overall},
                {"cases", acc.counts.total()},
                {"per_label", per_label}};
}

json winrate_report(const WinCounts& c, TiePolicy policy) {
    return json{{"win_rate", win_rate_from_counts(c, policy)},
                {"wins", c.wins},
                {"ties", c.ties},
                {"losses", c.losses},
                {"total", c.total()},
                {"tie_policy", policy == TiePolicy::half ? "half" : "exclude"}};
}

std::string fc_table(const FcMetrics& m) {
    return format_table({{"tool selection acc", fmt4(m.selection_acc)},
                         {"tool selection precision", fmt4(m.selection.precision)},
                         {"tool selection recall", fmt4(m.selection.recall)},
                         {"tool selection f1", fmt4(m.selection.f1)},
                         {"parameter accuracy", fmt4(m.param_acc)},
                         {"response accuracy", fmt4(m.response_acc)},
                         {"overall accuracy", fmt4(m.overall_acc)}});
}

std::string rejection_table(const PrecisionRecall& pr) {
    return format_table({{"precision", fmt4(pr.precision)},
                         {"recall", fmt4(pr.recall)},
                         {"f1", fmt4(pr.f1)}});
}

std::string qa_table(const QaCounts& c) {
    const double rate =
        c.total == 0 ? 0.0 : static_cast<double>(c.hits) / static_cast<double>(c.total);
    return format_table({{"presence rate", fmt4(rate)},
                         {"hits", std::to_string(c.hits)},
                         {"items", std::to_string(c.total)}});
}

std::string wer_table(const EditCounts& words, const EditCounts& chars) {
    const auto word_rate = corpus_rate(words);
    const auto char_rate = corpus_rate(chars);
    return format_table(
        {{"wer", word_rate ? fmt4(*word_rate) : "undefined"},
         {"cer", char_rate ? fmt4(*char_rate) : "undefined"},
         {"word errors (S/I/D)", std::to_string(words.substitutions) + "/" +
                                     std::to_string(words.insertions) + "/" +
                                     std::to_string(words.deletions)},
         {"char errors (S/I/D)", std::to_string(chars.substitutions) + "/" +
                                     std::to_string(chars.insertions) + "/" +
                                     std::to_string(chars.deletions)}});
}

std::string emotion_table(const EmotionAccuracy& acc) {
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& [label, rate] : acc.per_label) rows.push_back({label, fmt4(rate)});
    rows.push_back({"overall", fmt4(acc.overall)});
    return format_table(rows);
}

std::string winrate_table(const WinCounts& c, TiePolicy policy) {
    return format_table({{"win rate", fmt4(win_rate_from_counts(c, policy))},
                         {"wins", std::to_string(c.wins)},
                         {"ties", std::to_string(c.ties)},
                         {"losses", std::to_string(c.losses)}});
}

} // namespace lucy
