#pragma once

#include <map>
#include <string>
#include <string_view>

namespace schemacoder {

enum class PromptId { explore, select, pattern, merge, mutate, boost };

const char* prompt_id_name(PromptId id);
PromptId prompt_id_from_name(std::string_view name);

// JSON shape every rule-document reply must follow; embedded verbatim in
// the pattern/merge/mutate/boost prompts.
extern const char* const kRuleDocumentContract;

extern const char* const kPromptVersion;

// Substitutes {{name}} placeholders. Binding values are inserted verbatim
// and never re-scanned. Throws TemplateError when a placeholder has no
// binding.
std::string render_prompt(PromptId id, const std::map<std::string, std::string>& bindings);

const std::string& prompt_template(PromptId id);

}  // namespace schemacoder
