// Evaluation metrics: function-call suite, rejection classification, QA
// presence rate, WER/CER, emotion accuracy with label mapping, win rate.
// Each family exposes a mergeable count struct so shards can be summed.
#pragma once

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lucy {

// ---- shared counts ----

struct BinaryCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    BinaryCounts& operator+=(const BinaryCounts& o);
    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const BinaryCounts&) const = default;
};

struct PrecisionRecall {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    // undefined ratios (zero denominator) are reported as 0 with the flag down
    bool precision_defined = true, recall_defined = true;
};

PrecisionRecall precision_recall(const BinaryCounts& c);

// ---- function calls ----

struct FcCase {
    std::string id;
    std::optional<std::string> gold_tool; // absent = negative case
    nlohmann::json gold_params = nlohmann::json::object();
    std::optional<std::string> pred_tool;
    nlohmann::json pred_params = nlohmann::json::object();
    std::optional<bool> param_correct;    // judged upstream
    std::optional<bool> response_correct; // judged upstream
};

struct FcCounts {
    BinaryCounts selection;     // positive class = tool needed; wrong tool is FP and FN
    std::size_t selection_correct = 0;
    std::size_t gold_positive = 0;
    std::size_t param_correct = 0;    // over gold positives
    std::size_t response_correct = 0; // over gold positives
    std::size_t overall_correct = 0;
    std::size_t total = 0;

    FcCounts& operator+=(const FcCounts& o);
};

struct FcMetrics {
    double selection_acc = 0.0;
    PrecisionRecall selection;
    double param_acc = 0.0;
    double response_acc = 0.0;
    double overall_acc = 0.0;
    std::size_t total = 0;
    std::size_t gold_positive = 0;
};

FcCounts fc_counts(std::span<const FcCase> cases);
FcMetrics fc_metrics_from_counts(const FcCounts& counts);
FcMetrics fc_metrics(std::span<const FcCase> cases); // empty -> domain_error

// ---- rejection ----

struct RejectionCase {
    std::string id;
    bool gold_respond = false;
    bool pred_respond = false;
};

BinaryCounts rejection_counts(std::span<const RejectionCase> cases);
PrecisionRecall rejection_metrics(std::span<const RejectionCase> cases); // empty -> domain_error

// ---- QA presence ----

struct QaItem {
    std::string id;
    std::vector<std::string> answers;
    std::string response;
};

struct QaCounts {
    std::size_t hits = 0, total = 0;

    QaCounts& operator+=(const QaCounts& o);
};

// lowercase ASCII, drop punctuation, collapse whitespace runs, trim.
std::string normalize_text(std::string_view text);
bool phrase_present(const QaItem& item); // any answer phrase, normalized substring
QaCounts qa_counts(std::span<const QaItem> items);
double presence_rate(std::span<const QaItem> items); // empty -> domain_error

// ---- WER / CER ----

struct EditCounts {
    std::size_t substitutions = 0, insertions = 0, deletions = 0;
    std::size_t ref_len = 0;

    EditCounts& operator+=(const EditCounts& o);
    std::size_t edits() const { return substitutions + insertions + deletions; }
    bool operator==(const EditCounts&) const = default;
};

struct WerResult {
    EditCounts counts;
    std::optional<double> rate; // absent when ref is empty
};

// Unit-cost Levenshtein; on equal-cost paths prefer substitution, then
// deletion, then insertion.
WerResult edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp);
WerResult wer(const std::string& ref, const std::string& hyp); // whitespace tokens
WerResult cer(const std::string& ref, const std::string& hyp); // utf-8 codepoints

std::vector<std::string> split_words(const std::string& text);
std::vector<std::string> utf8_codepoints(const std::string& text); // parse_error on bad utf-8

struct WerCase {
    std::string id;
    std::string ref;
    std::string hyp;
};

std::optional<double> corpus_rate(const EditCounts& merged); // edits / ref_len

// ---- emotion ----

struct EmotionCase {
    std::string id;
    std::string gold;
    std::string pred_raw; // annotator output; may need mapping
};

using LabelMapping = std::map<std::string, std::string>;
LabelMapping default_emotion_mapping(); // {"Other" -> "sorry"}

struct LabelCount {
    std::size_t correct = 0, total = 0;

    bool operator==(const LabelCount&) const = default;
};

struct EmotionCounts {
    std::map<std::string, LabelCount> per_label; // keyed by gold label

    EmotionCounts& operator+=(const EmotionCounts& o);
    std::size_t total() const;
    std::size_t correct() const;
};

struct EmotionAccuracy {
    std::map<std::string, double> per_label;
    EmotionCounts counts;
    double overall = 0.0;
};

EmotionCounts emotion_counts(std::span<const EmotionCase> cases,
                             const std::vector<std::string>& label_set,
                             const LabelMapping& mapping = default_emotion_mapping());
EmotionAccuracy emotion_accuracy(std::span<const EmotionCase> cases,
                                 const std::vector<std::string>& label_set,
                                 const LabelMapping& mapping = default_emotion_mapping());

// ---- win rate ----

enum class Winner { candidate, baseline, tie };

struct JudgeVerdict {
    std::string id;
    Winner winner = Winner::tie;
};

enum class TiePolicy { half, exclude };

struct WinCounts {
    std::size_t wins = 0, ties = 0, losses = 0;

    WinCounts& operator+=(const WinCounts& o);
    std::size_t total() const { return wins + ties + losses; }
};

WinCounts win_counts(std::span<const JudgeVerdict> verdicts);
double win_rate_from_counts(const WinCounts& c, TiePolicy policy = TiePolicy::half);
double win_rate(std::span<const JudgeVerdict> verdicts, TiePolicy policy = TiePolicy::half);

// ---- JSONL io ----
// One JSON object per line; blank lines skipped; errors carry the line number.

std::vector<FcCase> fc_cases_from_jsonl(std::istream& in);
std::vector<RejectionCase> rejection_cases_from_jsonl(std::istream& in);
std::vector<QaItem> qa_items_from_jsonl(std::istream& in);
std::vector<WerCase> wer_cases_from_jsonl(std::istream& in);
std::vector<EmotionCase> emotion_cases_from_jsonl(std::istream& in);
std::vector<JudgeVerdict> verdicts_from_jsonl(std::istream& in);

// ---- reports ----

nlohmann::json fc_report(const FcMetrics& m);
nlohmann::json rejection_report(const PrecisionRecall& pr, const BinaryCounts& c);
nlohmann::json qa_report(const QaCounts& c);
nlohmann::json wer_report(const EditCounts& words, const EditCounts& chars);
nlohmann::json emotion_report(const EmotionAccuracy& acc);
nlohmann::json winrate_report(const WinCounts& c, TiePolicy policy);

std::string fc_table(const FcMetrics& m);
std::string rejection_table(const PrecisionRecall& pr);
std::string qa_table(const QaCounts& c);
std::string wer_table(const EditCounts& words, const EditCounts& chars);
std::string emotion_table(const EmotionAccuracy& acc);
std::string winrate_table(const WinCounts& c, TiePolicy policy);

} // namespace lucy
