#include "ecbsim/prompting.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ecbsim/digest.hpp"

namespace ecbsim::prompting {

using nlohmann::json;

namespace {

// Section headers of the analyst template, in order. Section-rewrite rules
// replace everything between one header and the next.
const std::vector<std::string> kSectionHeaders = {
    "Context:", "Trader Characteristics:", "Task:", "Output:", "Guidelines:",
};

std::string replace_all(std::string text, const std::string& find, const std::string& replace) {
    if (find.empty()) return text;
    size_t pos = 0;
    while ((pos = text.find(find, pos)) != std::string::npos) {
        text.replace(pos, find.size(), replace);
        pos += replace.size();
    }
    return text;
}

std::string kind_label(PromptKind kind) {
    switch (kind) {
        case PromptKind::ZeroShot: return "zero-shot";
        case PromptKind::FewShot: return "few-shot";
        case PromptKind::JudgeRevision: return "judge-rev";
        case PromptKind::Perturbation: return "perturb";
    }
    return "?";
}

std::string format_pp(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace

std::string make_version_tag(PromptKind kind, int iteration, int variation_id,
                             const std::string& body) {
    std::string label = kind_label(kind);
    if (kind == PromptKind::JudgeRevision) label += std::to_string(iteration);
    if (kind == PromptKind::Perturbation) label += std::to_string(variation_id);
    return label + "@" + short_digest(body, 12);
}

PromptSpec zero_shot_template(const std::vector<personas::AgentPersona>& population,
                              const RenderOptions& options) {
    int n = options.delegated_personas || population.empty()
                ? options.population
                : static_cast<int>(population.size());
    std::string n_str = std::to_string(n);

    std::string roster;
    if (!options.delegated_personas && !population.empty()) {
        roster = "The trader roster is fixed for this simulation:\n";
        for (const auto& p : population) roster += "- " + personas::describe(p) + "\n";
    } else {
        roster =
            "Assign these characteristics yourself to create " + n_str +
            " heterogeneous traders for this press conference, and keep the assignment "
            "consistent across all of a trader's rows.\n";
    }

    std::string body =
        "Context:\n"
        "You are simulating the Euro area interest rate swap market, composed of " + n_str +
        " individual traders.\n"
        "These traders interpret the ECB Governing Council press conference, which communicates "
        "monetary policy decisions, economic assessments, and includes a Q&A session with "
        "journalists.\n"
        "Each trader then makes a trading decision to maximize profit based on their "
        "interpretation of the conference and their unique characteristics.\n"
        "\n"
        "Trader Characteristics:\n"
        "Each trader has the following attributes:\n"
        "- Risk Aversion: High/Medium/Low determines sensitivity to uncertainty and preference "
        "for stability\n"
        "- Behavioral Biases (1-2 per trader): e.g., Confirmation Bias, Overconfidence, "
        "Anchoring, Herding, Loss Aversion, Recency Bias\n"
        "- Interpretation Style (1 per trader): e.g., Fundamentalist, Technical, "
        "Sentiment-driven, Quantitative, Narrative-focused, Policy-skeptic\n" +
        roster +
        "\n"
        "Task:\n"
        "You are given the text of a single ECB press conference.\n"
        "For each of the " + n_str +
        " traders, simulate their individual trading action in the interest rate swap market "
        "across three tenors (3 months, 2 years, 10 years).\n"
        "For each tenor, the trader must:\n"
        "    - Provide an expected rate direction: Up / Down / Unchanged (relative to the "
        "pre-conference rate)\n"
        "    - Provide a new expected swap rate (in percent, to two decimal places)\n"
        "    - Provide a confidence score (0 to 100)\n"
        "\n"
        "Output:\n"
        "Provide a table with the following structure for each press conference, trader, and "
        "interest rate tenor\n"
        "\n"
        "| Date | Trader ID | Tenor | Expected Direction | New Expected Rate (%) | Confidence "
        "(0-100) |\n"
        "|------|-----------|-------|--------------------|-----------------------|------------"
        "--------|\n"
        "| YYYY-MM-DD | T001 | 3M | Up | 3.15 | 65 |\n"
        "| YYYY-MM-DD | T001 | 2Y | Down | 2.85 | 80 |\n"
        "| ... | ... | ... | ... | ... | ... |\n"
        "\n"
        "Guidelines:\n"
        "- Use only the information available as of [date].\n"
        "- Do not aggregate or summarize responses.\n"
        "- Reflect diversity in interpretation, risk tolerance, and horizon. Rationale must be "
        "unique for each trader and can vary across tenors.\n"
        "- Output only a markdown table with the specified columns, no additional text. Do not "
        "use JSON or any other data serialization format.\n";

    PromptSpec spec;
    spec.kind = PromptKind::ZeroShot;
    spec.body = std::move(body);
    spec.version_tag = make_version_tag(spec.kind, 0, 0, spec.body);
    return spec;
}

std::string materialize(const std::string& template_body, const corpus::Conference& target) {
    std::string body = replace_all(template_body, "[date]", target.date.iso());
    body += "\nPress conference (" + target.date.iso() + ") transcript:\n" + target.transcript +
            "\n";
    return body;
}

PromptSpec render_zero_shot(const corpus::Conference& target,
                            const std::vector<personas::AgentPersona>& population,
                            const RenderOptions& options) {
    PromptSpec spec = zero_shot_template(population, options);
    spec.body = materialize(spec.body, target);
    spec.version_tag = make_version_tag(spec.kind, 0, 0, spec.body);
    return spec;
}

PromptSpec render_few_shot(const corpus::Conference& target, const FewShotContext& history,
                           const std::vector<personas::AgentPersona>& population,
                           const RenderOptions& options) {
    if (history.exemplars.empty()) throw NoHistoryError(target.date);
    for (const auto& ex : history.exemplars) {
        if (!(ex.conference.date < target.date))
            throw ValidationError("few-shot exemplar " + ex.conference.date.iso() +
                                  " does not pre-date target " + target.date.iso());
    }

    PromptSpec spec = render_zero_shot(target, population, options);
    spec.kind = PromptKind::FewShot;

    std::string section =
        "\nHistorical Examples:\n"
        "The following earlier press conferences are provided as context, each with the "
        "market-based disagreement that followed it (average daily high-low range of OIS "
        "rates over the post-conference window, in percentage points).\n";
    int idx = 0;
    for (const auto& ex : history.exemplars) {
        ++idx;
        section += "\nExample " + std::to_string(idx) + " - press conference of " +
                   ex.conference.date.iso() + ":\n" + ex.conference.transcript + "\n";
        section += "Market-based disagreement after this conference:";
        bool first = true;
        for (corpus::Tenor t : corpus::kAllTenors) {
            auto it = ex.market_disagreement.find(t);
            if (it == ex.market_disagreement.end()) continue;
            section += std::string(first ? " " : ", ") + corpus::tenor_token(t) + ": " +
                       format_pp(it->second);
            first = false;
        }
        if (first) section += " not available";
        section += "\n";
    }

    spec.body += section;
    spec.version_tag = make_version_tag(spec.kind, 0, 0, spec.body);
    return spec;
}

const std::string& judge_system_prompt() {
    static const std::string text =
        "Context:\n"
        "You are an expert AI system designed to optimize prompts for another AI (the "
        "\"Analyst LLM\").\n"
        "\n"
        "Your ultimate goal is to refine the Analyst LLM's prompt to improve its ability to "
        "replicate the market volatility of OIS rates based on ECB press conference "
        "transcripts.\n"
        "Specifically, you must ensure that the standard deviation of the Analyst LLM's "
        "predictions correlates highly with the actual, observed market volatility of the "
        "3-month, 2-year and 10-year OIS rates.\n"
        "This means a higher standard deviation in the Analyst's predictions should correspond "
        "to higher actual market volatility, and vice-versa.\n"
        "\n"
        "You will be provided with:\n"
        "- The current Analyst LLM prompt.\n"
        "- The most recent performance (Spearman correlation coefficient between the Analyst "
        "LLM's predicted standard deviations and actual market volatility).\n"
        "- The historical performance trend, including past critiques and proposed prompt "
        "summaries.\n"
        "\n"
        "Your task is to:\n"
        "1. Critique the current prompt: Identify specific weaknesses or areas of ambiguity "
        "that might directly hinder achieving a high positive correlation. Consider:\n"
        "   - Clarity and Specificity: Is the Analyst LLM's task unambiguous?\n"
        "   - Emphasis on Uncertainty: Does the prompt adequately guide the Analyst to reflect "
        "internal uncertainty in its prediction spread?\n"
        "   - Guidance on Nuance: Does it encourage consideration of subtle market signals "
        "from the text?\n"
        "2. Suggest a Revised Prompt: Propose a new version of the Analyst LLM's prompt that "
        "directly addresses the identified weaknesses and aims to increase the correlation. Be "
        "precise with your suggested changes.\n"
        "3. Explain your reasoning: Articulate why your proposed revisions are expected to "
        "improve the correlation, linking specific prompt changes to anticipated improvements "
        "in the Analyst LLM's behavior regarding uncertainty quantification.\n"
        "\n"
        "Your output must be in JSON format. Do not include any other text outside the JSON.\n"
        "\n"
        "Example JSON output:\n"
        "{\n"
        "  \"critique\": \"The previous prompt was too general regarding how to express "
        "uncertainty. It didn't explicitly ask the Analyst LLM to consider multiple "
        "viewpoints, which is key for its standard deviation to accurately reflect market "
        "volatility.\",\n"
        "  \"revised_prompt\": \"<the full text of the improved analyst prompt>\",\n"
        "  \"reasoning\": \"<why the revisions are expected to raise the correlation>\"\n"
        "}\n";
    return text;
}

std::string render_judge_input(const PromptSpec& current, double score,
                               const std::vector<HistoryDigestEntry>& history) {
    if (!(score >= -1.0 && score <= 1.0))
        throw ValidationError("judge input score must lie in [-1, 1]");

    char score_buf[32];
    std::snprintf(score_buf, sizeof(score_buf), "%.4f", score);

    std::string text = "Current Analyst Prompt:\n<<<PROMPT\n" + current.body + "\nPROMPT>>>\n\n";
    text += std::string("Most recent performance: average Spearman correlation = ") + score_buf +
            "\n\nOptimization history:\n";
    if (history.empty()) {
        text += "(none)\n";
    } else {
        for (const auto& e : history) {
            char sbuf[32];
            std::snprintf(sbuf, sizeof(sbuf), "%.4f", e.score);
            std::string summary = e.critique_summary;
            if (summary.size() > 160) summary = summary.substr(0, 157) + "...";
            std::replace(summary.begin(), summary.end(), '\n', ' ');
            text += "- iteration " + std::to_string(e.iteration) + ": score " + sbuf + " | " +
                    summary + "\n";
        }
    }
    return text;
}

PerturbationRegistry PerturbationRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw corpus::MissingFileError(path);

    PerturbationRegistry reg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw corpus::MalformedRecordError(lineno, "not a JSON object");

        Variation v;
        v.id = rec.at("id").get<int>();
        v.intensity = rec.at("intensity").get<std::string>();
        if (v.intensity != "minor" && v.intensity != "medium")
            throw corpus::MalformedRecordError(lineno, "intensity must be minor or medium");
        v.reconstruction = rec.value("reconstruction", false);
        v.summary = rec.value("summary", "");
        for (const auto& r : rec.at("rules")) {
            Rule rule;
            if (r.contains("find")) {
                rule.find = r.at("find").get<std::string>();
                rule.replace = r.at("replace").get<std::string>();
            } else if (r.contains("section")) {
                rule.section = r.at("section").get<std::string>();
                rule.new_text = r.at("new_text").get<std::string>();
            } else {
                throw corpus::MalformedRecordError(lineno, "rule needs 'find' or 'section'");
            }
            v.rules.push_back(std::move(rule));
        }
        if (reg.variations_.count(v.id))
            throw corpus::MalformedRecordError(lineno, "duplicate variation id");
        reg.variations_[v.id] = std::move(v);
    }
    return reg;
}

const PerturbationRegistry::Variation& PerturbationRegistry::variation(int id) const {
    auto it = variations_.find(id);
    if (it == variations_.end()) throw UnknownVariationError(id);
    return it->second;
}

std::vector<int> PerturbationRegistry::ids() const {
    std::vector<int> out;
    out.reserve(variations_.size());
    for (const auto& [id, _] : variations_) out.push_back(id);
    return out;
}

namespace {

// Replace the body of one template section (text between its header line and
// the next known header). new_text must itself start with the header line.
std::string rewrite_section(const std::string& body, const std::string& section,
                            const std::string& new_text) {
    std::string header = section + ":";
    size_t start = body.find(header);
    if (start == std::string::npos)
        throw ValidationError("prompt has no section '" + header + "'");
    size_t end = std::string::npos;
    for (const auto& h : kSectionHeaders) {
        if (h == header) continue;
        size_t pos = body.find(h, start + header.size());
        if (pos != std::string::npos && pos < end) end = pos;
    }
    std::string out = body.substr(0, start) + new_text;
    if (end != std::string::npos) {
        if (!out.empty() && out.back() != '\n') out += "\n";
        out += "\n" + body.substr(end);
    }
    return out;
}

} // namespace

PromptSpec PerturbationRegistry::apply(const PromptSpec& base, int variation_id) const {
    if (base.kind != PromptKind::ZeroShot)
        throw ValidationError("perturbations apply to zero-shot prompts only");
    const Variation& v = variation(variation_id);

    std::string body = base.body;
    for (const auto& rule : v.rules) {
        if (!rule.find.empty()) {
            size_t pos = 0;
            std::string out;
            out.reserve(body.size());
            while (true) {
                size_t hit = body.find(rule.find, pos);
                if (hit == std::string::npos) {
                    out += body.substr(pos);
                    break;
                }
                out += body.substr(pos, hit - pos);
                out += rule.replace;
                pos = hit + rule.find.size();
            }
            body = std::move(out);
        } else {
            body = rewrite_section(body, rule.section, rule.new_text);
        }
    }

    PromptSpec spec;
    spec.kind = PromptKind::Perturbation;
    spec.variation_id = variation_id;
    spec.body = std::move(body);
    spec.version_tag = make_version_tag(spec.kind, 0, variation_id, spec.body);
    return spec;
}

std::vector<Date> scan_iso_dates(const std::string& text) {
    std::vector<Date> out;
    for (size_t i = 0; i + 10 <= text.size(); ++i) {
        if (text[i] != '0' && text[i] != '1' && text[i] != '2') continue;
        bool shape = true;
        for (size_t k = 0; k < 10 && shape; ++k) {
            char c = text[i + k];
            if (k == 4 || k == 7) {
                shape = (c == '-');
            } else {
                shape = std::isdigit(static_cast<unsigned char>(c)) != 0;
            }
        }
        if (!shape) continue;
        // reject longer digit runs bleeding into the match on either side
        if (i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]))) continue;
        if (i + 10 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 10])))
            continue;
        try {
            out.push_back(Date::parse_iso(text.substr(i, 10)));
            i += 9;
        } catch (const DataError&) {
            // digit pattern that is not a real calendar date; skip
        }
    }
    return out;
}

bool has_future_dates(const std::string& text, Date target) {
    for (Date d : scan_iso_dates(text)) {
        if (d > target) return true;
    }
    return false;
}

} // namespace ecbsim::prompting
