#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecbsim/corpus.hpp"
#include "ecbsim/dates.hpp"
#include "ecbsim/errors.hpp"
#include "ecbsim/personas.hpp"

namespace ecbsim::prompting {

enum class PromptKind { ZeroShot, FewShot, JudgeRevision, Perturbation };

/// An analyst prompt. Bodies produced by *_template() are event-agnostic (the
/// "[date]" placeholder is still present and no transcript is attached); the
/// render_* functions return the per-event materialized form. The judge loop
/// optimizes templates and materializes them per conference.
struct PromptSpec {
    PromptKind kind = PromptKind::ZeroShot;
    int iteration = 0;     // JudgeRevision only, >= 1
    int variation_id = 0;  // Perturbation only, 1..15
    std::string body;
    std::string version_tag;
};

/// Make a tag like "zero-shot@5f3a9c0d1b2e" from the kind and a body digest.
std::string make_version_tag(PromptKind kind, int iteration, int variation_id,
                             const std::string& body);

struct RenderOptions {
    /// When true the prompt keeps the original delegated wording (the model
    /// invents trader characteristics itself); when false the host-generated
    /// roster is embedded, which is the reproducible default.
    bool delegated_personas = false;
    int population = 30;  // used for the "composed of N individual traders" line
};

/// Event-agnostic analyst prompt (Context / Trader Characteristics / Task /
/// Output / Guidelines sections, with "[date]" placeholder).
PromptSpec zero_shot_template(const std::vector<personas::AgentPersona>& population,
                              const RenderOptions& options = {});

/// Substitute the conference date into a template body and append the
/// transcript block. Used by every strategy, including judge revisions.
std::string materialize(const std::string& template_body, const corpus::Conference& target);

/// Fully rendered zero-shot prompt for one conference.
PromptSpec render_zero_shot(const corpus::Conference& target,
                            const std::vector<personas::AgentPersona>& population,
                            const RenderOptions& options = {});

/// One historical exemplar: a prior conference plus the market disagreement
/// realized after it (per tenor, percentage points).
struct Exemplar {
    corpus::Conference conference;
    std::map<corpus::Tenor, double> market_disagreement;
};

/// 1-3 exemplars, all strictly earlier than the target, most recent last.
struct FewShotContext {
    std::vector<Exemplar> exemplars;
};

struct NoHistoryError : ValidationError {
    explicit NoHistoryError(Date target)
        : ValidationError("no prior conferences available before " + target.iso()) {}
};

/// Zero-shot body extended with a historical-examples section.
PromptSpec render_few_shot(const corpus::Conference& target, const FewShotContext& history,
                           const std::vector<personas::AgentPersona>& population,
                           const RenderOptions& options = {});

/// Judge-facing system prompt (critique / revise / explain, JSON output).
const std::string& judge_system_prompt();

/// Digest of one past optimization step shown to the judge.
struct HistoryDigestEntry {
    int iteration = 0;
    double score = 0.0;
    std::string critique_summary;
};

/// User message for the judge: the current analyst prompt verbatim (between
/// <<<PROMPT / PROMPT>>> markers), the latest average correlation and a
/// compact history digest. Requires score in [-1, 1].
std::string render_judge_input(const PromptSpec& current, double score,
                               const std::vector<HistoryDigestEntry>& history);

struct UnknownVariationError : ValidationError {
    explicit UnknownVariationError(int id)
        : ValidationError("unknown prompt variation id: " + std::to_string(id)) {}
};

/// The perturbation registry: an editable JSON-lines file of find/replace and
/// section-rewrite rules, one line per variation (ids 1..15, intensities
/// "minor"/"medium"). Rules apply in listed order; section rewrites replace
/// the text between one section header and the next.
class PerturbationRegistry {
public:
    struct Rule {
        // exactly one of the two forms is set
        std::string find, replace;        // substitution (replaces all occurrences)
        std::string section, new_text;    // section rewrite
    };
    struct Variation {
        int id = 0;
        std::string intensity;  // "minor" | "medium"
        bool reconstruction = false;
        std::string summary;
        std::vector<Rule> rules;
    };

    static PerturbationRegistry load(const std::string& path);

    /// Apply variation `id` to a zero-shot template.
    PromptSpec apply(const PromptSpec& base, int variation_id) const;

    const Variation& variation(int id) const;
    std::vector<int> ids() const;
    size_t size() const { return variations_.size(); }

private:
    std::map<int, Variation> variations_;
};

/// All ISO dates (YYYY-MM-DD) appearing in `text`, in order of appearance.
std::vector<Date> scan_iso_dates(const std::string& text);

/// Leakage check: true when any embedded date lies strictly after the target
/// conference date. The target's own date is expected to appear (the "as of"
/// guideline and the output table use it) and is not leakage.
bool has_future_dates(const std::string& text, Date target);

} // namespace ecbsim::prompting
