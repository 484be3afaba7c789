#ifndef V4E_ICG_HPP
#define V4E_ICG_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "v4e/synthworld.hpp"

namespace v4e {

// Instruction-to-Caption Generator: classifies an editing instruction into
// one of the 11 task categories and compiles the evolution-style caption
// that conditions the teacher.

struct UnknownCategory : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CaptionTemplate {
    EditTask category;
    std::string pattern;             // text with {slot} placeholders
    std::vector<std::string> slots;  // every slot named in the pattern
};

const std::vector<CaptionTemplate>& caption_templates();

struct EvolutionCaption {
    std::string text;
    EditTask category = EditTask::kSubjectAddition;
    bool refined = false;
};

inline constexpr const char* kRefineSuffix =
    " The video is high-resolution and high-quality, and the overall evolution is temporally "
    "coherent.";

// Ordered keyword rules; ties break by the fixed priority
// Text > Motion > Portrait > Material > Color > Replacement > Removal >
// Addition > Background > Style > Tone. Throws UnknownCategory when no rule
// fires.
EditTask classify_instruction(const std::string& text);

// Instantiates the category template with slots extracted from the
// instruction; falls back to generic slots ("the object") when extraction
// fails. Two canonical rewrites are matched verbatim before the templates.
EvolutionCaption generate_caption(const std::string& instruction, EditTask category);

// Appends the post-refinement sentence; idempotent. Refining an empty
// caption is a precondition violation.
EvolutionCaption refine_caption(const EvolutionCaption& caption);

// classify + generate + refine in one step.
EvolutionCaption caption_for(const std::string& instruction);

}  // namespace v4e

#endif
