#include "schemacoder/prompts.hpp"

#include "schemacoder/errors.hpp"

#include <array>

namespace schemacoder {

const char* const kPromptVersion = "v1";

const char* const kRuleDocumentContract =
    "Reply with nothing but a JSON rule document of this exact shape:\n"
    "{\"version\": 1, \"rules\": [{\"id\": \"<short-name>\", \"pattern\": \"<regular expression "
    "matching a whole line>\", \"template\": \"<line text with <*> in place of each captured "
    "variable>\", \"priority\": 0}]}\n"
    "Every pattern must match complete lines only, and the number of capture groups in a pattern "
    "must equal the number of <*> placeholders in its template. Lower priority values are tried "
    "first.";

namespace {

const std::string kExploreTemplate =
    "You are studying a log file in order to derive the message templates that generated it.\n"
    "\n"
    "Background knowledge:\n"
    "{{background}}\n"
    "\n"
    "Log excerpt:\n"
    "{{chunk}}\n"
    "\n"
    "Write up to 8 open-ended exploration questions about this log, one per line, numbered "
    "\"1.\", \"2.\", and so on. Each question should probe a distinct family of message "
    "structures, recurring fields, or anomalies visible above. Output only the numbered "
    "questions.";

const std::string kSelectTemplate =
    "Background knowledge:\n"
    "{{background}}\n"
    "\n"
    "Exploration question: {{question}}\n"
    "\n"
    "Log chunks (each introduced by a line \"--- chunk <id> ---\"):\n"
    "{{chunks}}\n"
    "\n"
    "Answer the question by quoting the most relevant log segments. Reply with a JSON array of "
    "objects like [{\"chunk\": 0, \"quote\": \"<lines copied from that chunk>\"}]. Every quote "
    "must be copied verbatim, byte for byte, from the named chunk. Output only the JSON array.";

const std::string kPatternTemplate =
    "Background knowledge:\n"
    "{{background}}\n"
    "\n"
    "Exploration question: {{question}}\n"
    "\n"
    "Selected log segments:\n"
    "{{segments}}\n"
    "\n"
    "First, group the segment lines by structural similarity. Then, for each group, write one "
    "extraction rule: a regular expression that matches those whole lines, plus the shared "
    "message template with <*> marking each captured variable.\n"
    "{{contract}}";

const std::string kMergeTemplate =
    "Background knowledge:\n"
    "{{background}}\n"
    "\n"
    "Below are parser rule documents produced for different regions of the same log file. Merge "
    "them into a single document. Keep every distinct rule intact, drop exact duplicates only, "
    "and order rules from most specific to most general.\n"
    "\n"
    "Documents:\n"
    "{{documents}}\n"
    "\n"
    "{{contract}}";

const std::string kMutateTemplate =
    "Background knowledge:\n"
    "{{background}}\n"
    "\n"
    "Current parser rule document:\n"
    "{{parent}}\n"
    "\n"
    "Evaluation feedback:\n"
    "{{feedback}}\n"
    "\n"
    "Propose an improved rule document: fix the misparsed examples above while keeping the rules "
    "that already work. You may edit, reorder, add, or remove rules.\n"
    "{{contract}}";

const std::string kBoostTemplate =
    "Background knowledge:\n"
    "{{background}}\n"
    "\n"
    "Base parser rule document:\n"
    "{{current}}\n"
    "\n"
    "Patch rules generated for the lines the base parser gets wrong:\n"
    "{{fragment}}\n"
    "\n"
    "Integrate the patch into the base parser. Lines the base parser already handles correctly "
    "must keep matching the same rules; the patch rules should win only on the lines the base "
    "gets wrong.\n"
    "{{contract}}";

}  // namespace

const char* prompt_id_name(PromptId id) {
    switch (id) {
        case PromptId::explore: return "explore";
        case PromptId::select: return "select";
        case PromptId::pattern: return "pattern";
        case PromptId::merge: return "merge";
        case PromptId::mutate: return "mutate";
        case PromptId::boost: return "boost";
    }
    return "unknown";
}

PromptId prompt_id_from_name(std::string_view name) {
    if (name == "explore") return PromptId::explore;
    if (name == "select") return PromptId::select;
    if (name == "pattern") return PromptId::pattern;
    if (name == "merge") return PromptId::merge;
    if (name == "mutate") return PromptId::mutate;
    if (name == "boost") return PromptId::boost;
    throw TemplateError("unknown prompt template: " + std::string(name));
}

const std::string& prompt_template(PromptId id) {
    switch (id) {
        case PromptId::explore: return kExploreTemplate;
        case PromptId::select: return kSelectTemplate;
        case PromptId::pattern: return kPatternTemplate;
        case PromptId::merge: return kMergeTemplate;
        case PromptId::mutate: return kMutateTemplate;
        case PromptId::boost: return kBoostTemplate;
    }
    return kExploreTemplate;
}

std::string render_prompt(PromptId id, const std::map<std::string, std::string>& bindings) {
    const std::string& tmpl = prompt_template(id);
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        std::size_t open = tmpl.find("{{", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string::npos) {
            throw TemplateError(std::string("unterminated placeholder in template ") +
                                prompt_id_name(id));
        }
        std::string name = tmpl.substr(open + 2, close - open - 2);
        if (name == "contract") {
            out += kRuleDocumentContract;
        } else {
            auto it = bindings.find(name);
            if (it == bindings.end()) {
                throw TemplateError("missing binding '" + name + "' for template " +
                                    prompt_id_name(id));
            }
            out += it->second;
        }
        pos = close + 2;
    }
    return out;
}

}  // namespace schemacoder
