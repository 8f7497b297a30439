#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "robassist/clock.hpp"
#include "robassist/qa.hpp"
#include "robassist/questionnaire.hpp"
#include "robassist/rob_logic.hpp"

namespace rob {

inline constexpr int kSessionSchemaVersion = 1;

enum class Source { Model, Expert };
enum class VoteDirection { Up, Down };
enum class Provenance { Manual, Assisted };
enum class SessionStatus { InProgress, Complete };

std::string_view source_key(Source s) noexcept;
std::string_view vote_key(VoteDirection v) noexcept;
std::string_view provenance_key(Provenance p) noexcept;
std::string_view status_key(SessionStatus s) noexcept;

struct Vote {
    std::size_t paragraph_index = 0;
    VoteDirection direction = VoteDirection::Up;
    bool operator==(const Vote&) const = default;
};

struct QuestionRecord {
    std::string qid;
    std::optional<ModelAnswer> model_answer;
    // Model answers replaced after their record was invalidated by gating.
    std::vector<ModelAnswer> superseded;
    std::optional<Answer> final_answer;  // absent = unanswered
    std::string final_rationale;
    Source answer_source = Source::Model;
    Source rationale_source = Source::Model;
    std::vector<Vote> votes;                     // one per paragraph, sorted
    std::vector<std::size_t> added_paragraphs;  // sorted, disjoint from evidence
    std::optional<std::size_t> gold_evidence;   // annotator-identified paragraph
    std::string created_at;
    std::string updated_at;

    const std::string& model_rationale() const;
    bool shown_as_evidence(std::size_t paragraph) const;
    bool operator==(const QuestionRecord&) const = default;
};

struct AssessmentSession {
    int schema_version = kSessionSchemaVersion;
    std::string session_id;
    std::string doc_id;
    std::string annotator_id;
    Provenance provenance = Provenance::Assisted;
    std::optional<std::string> model_id;
    std::optional<ContextMode> context_mode;
    std::map<std::string, QuestionRecord> records;
    std::optional<DomainLevels> domain_judgments;
    std::optional<RiskLevel> overall;
    SessionStatus status = SessionStatus::InProgress;
    std::string created_at;
    std::string updated_at;

    // Final answers of answered records (including NotApplicable).
    AnswerMap final_answers() const;
    const QuestionRecord* record(const std::string& qid) const;
    bool operator==(const AssessmentSession&) const = default;
};

// Pure state transitions. Each takes the event timestamp so that replaying a
// log reproduces the snapshot exactly.

// Stores a fresh model answer for an active, unanswered question.
void record_model_answer(AssessmentSession& s, const Questionnaire& qn, const ModelAnswer& answer,
                         const std::string& ts);

// Expert answer (and optionally rationale). Re-evaluates gates: questions
// that become gated off get NotApplicable, those that become active again
// are cleared to unanswered.
void record_override(AssessmentSession& s, const Questionnaire& qn, const std::string& qid, Answer answer,
                     const std::optional<std::string>& rationale, const std::string& ts);

void edit_rationale(AssessmentSession& s, const std::string& qid, const std::string& rationale,
                    const std::string& ts);

// Latest vote per paragraph wins.
void record_vote(AssessmentSession& s, const std::string& qid, std::size_t paragraph, VoteDirection dir,
                 const std::string& ts);

void add_paragraph(AssessmentSession& s, const std::string& qid, std::size_t paragraph, const std::string& ts);

// Marks gated-off questions NotApplicable (and clears stale ones) without
// touching anything else.
void refresh_gating(AssessmentSession& s, const Questionnaire& qn, const std::string& ts);

// Requires all 22 answers; derives domain and overall judgments.
void complete_session(AssessmentSession& s, const Questionnaire& qn, const RuleSet& rules, const std::string& ts);

// Judgment for each domain whose questions are all answered.
struct SessionSummary {
    std::array<std::optional<RiskLevel>, kDomainCount> domains;
    std::optional<RiskLevel> overall;
    std::size_t answered = 0;
    std::size_t total = 0;
    ordered_json to_json() const;
};
SessionSummary summarize(const AssessmentSession& s, const Questionnaire& qn, const RuleSet& rules);

ordered_json export_session(const AssessmentSession& s);
std::string export_session_text(const AssessmentSession& s);  // dump(2) + newline
// Import errors for unknown schema versions and malformed input. Manual
// provenance forces Expert sources on every record.
AssessmentSession import_session(const json& j);
AssessmentSession import_session_text(std::string_view text);

struct UsageRow {
    std::size_t answers_model = 0, answers_expert = 0;
    std::size_t rationales_model = 0, rationales_expert = 0;
    // question level: records with at least one such action
    std::size_t questions_upvoted = 0, questions_downvoted = 0, questions_with_added = 0;
    // raw counts
    std::size_t upvotes = 0, downvotes = 0, added_paragraphs = 0;

    UsageRow& operator+=(const UsageRow& o);
    bool operator==(const UsageRow&) const = default;
};

struct UsageStats {
    std::array<UsageRow, kDomainCount> domains{};
    UsageRow total;
    std::size_t sessions = 0;
    std::size_t shown_passages = 0;  // evidence paragraphs across counted records

    ordered_json to_json() const;
};

// Counts records that carry a model answer (assisted workflow).
UsageStats usage_stats(std::span<const AssessmentSession> sessions);

// Percentage with one decimal, as printed in tables: 57.6.
double percent(std::size_t part, std::size_t whole);

// ---------------------------------------------------------------------------
// Event log

struct SessionEvent {
    std::string ts;
    std::string session_id;
    std::string event;
    ordered_json payload;

    ordered_json to_json() const;
    static SessionEvent from_json(const json& j);
};

// Applies one logged event. "create" and "import" replace the session.
void apply_event(AssessmentSession& s, const SessionEvent& e, const Questionnaire& qn, const RuleSet& rules);

// Storage backend: an append-only event journal plus a snapshot per session.
class SessionJournal {
public:
    virtual ~SessionJournal() = default;
    virtual void append(const SessionEvent& e) = 0;
    virtual void write_snapshot(const AssessmentSession& s) = 0;
    virtual std::vector<AssessmentSession> load_snapshots() const = 0;
    virtual std::vector<SessionEvent> events(const std::string& session_id) const = 0;
};

class MemoryJournal final : public SessionJournal {
public:
    void append(const SessionEvent& e) override;
    void write_snapshot(const AssessmentSession& s) override;
    std::vector<AssessmentSession> load_snapshots() const override;
    std::vector<SessionEvent> events(const std::string& session_id) const override;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<SessionEvent>> events_;
    std::map<std::string, std::string> snapshots_;
};

// <root>/<session_id>/events.jsonl and <root>/<session_id>/session.json
class FileJournal final : public SessionJournal {
public:
    explicit FileJournal(std::filesystem::path root);
    void append(const SessionEvent& e) override;
    void write_snapshot(const AssessmentSession& s) override;
    std::vector<AssessmentSession> load_snapshots() const override;
    std::vector<SessionEvent> events(const std::string& session_id) const override;

private:
    std::filesystem::path root_;
};

AssessmentSession replay(std::span<const SessionEvent> events, const Questionnaire& qn, const RuleSet& rules);

struct SessionHeader {
    std::string doc_id;
    std::string annotator_id;
    Provenance provenance = Provenance::Assisted;
    std::optional<std::string> model_id;
    std::optional<ContextMode> context_mode;
};

// Sessions keyed by id. Mutations on one session are serialized and
// journaled before they become visible; readers get the last committed
// snapshot.
class SessionStore {
public:
    SessionStore(std::shared_ptr<SessionJournal> journal, const Questionnaire& qn, const RuleSet& rules,
                 const Clock& clock = system_clock());

    AssessmentSession create(const SessionHeader& header);
    AssessmentSession import(AssessmentSession session);
    AssessmentSession get(const std::string& session_id) const;  // NotFound
    bool contains(const std::string& session_id) const;
    std::vector<std::string> ids() const;
    std::vector<AssessmentSession> all() const;

    // Journals {event, payload}, applies it and publishes the result.
    AssessmentSession apply(const std::string& session_id, const std::string& event, ordered_json payload);

    // Holds the session's writer lock for a longer operation (e.g. an LLM
    // call whose result is then applied).
    std::unique_lock<std::mutex> lock_session(const std::string& session_id) const;
    AssessmentSession apply_locked(const std::string& session_id, const std::string& event, ordered_json payload);

    const Questionnaire& questionnaire() const noexcept { return qn_; }
    const RuleSet& rules() const noexcept { return rules_; }
    const Clock& clock() const noexcept { return clock_; }
    SessionJournal& journal() noexcept { return *journal_; }

private:
    struct Entry {
        mutable std::mutex writer;
        mutable std::mutex snap_mu;  // guards the pointer swap only
        std::shared_ptr<const AssessmentSession> snapshot;
    };
    Entry& entry(const std::string& id) const;
    AssessmentSession commit(Entry& e, const std::string& session_id, const std::string& event, ordered_json payload);

    std::shared_ptr<SessionJournal> journal_;
    const Questionnaire& qn_;
    const RuleSet& rules_;
    const Clock& clock_;
    mutable std::shared_mutex map_mu_;
    std::map<std::string, std::unique_ptr<Entry>> entries_;
    std::size_t created_ = 0;
};

}  // namespace rob
