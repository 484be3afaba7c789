#include "v4e/icg.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace v4e {

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : lower(s)) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (!cur.empty()) {
            toks.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) toks.push_back(cur);
    return toks;
}

bool has_token(const std::vector<std::string>& toks, const std::set<std::string>& words) {
    for (const auto& t : toks)
        if (words.count(t)) return true;
    return false;
}

bool has_phrase(const std::string& low, const char* phrase) {
    return low.find(phrase) != std::string::npos;
}

const std::set<std::string> kColorWords = {"red",  "green",  "blue", "yellow", "purple", "orange",
                                           "cyan", "white",  "black", "gray",  "grey",   "pink",
                                           "brown", "magenta"};
const std::set<std::string> kMaterialWords = {"leather", "wood",   "wooden", "metal",  "metallic",
                                              "glass",   "stone",  "plastic", "fabric", "marble",
                                              "velvet",  "striped", "rough",  "smooth", "denim"};
const std::set<std::string> kLimbWords = {"arm", "arms", "hand", "hands", "forearm",
                                          "leg", "legs", "head", "elbow"};
const std::set<std::string> kMotionVerbs = {"raise", "raises", "lower", "lowers",
                                            "lift",  "lifts",  "bend",  "bends"};

// drop a leading article
std::string strip_article(const std::string& s) {
    for (const char* a : {"a ", "an ", "the "}) {
        if (s.rfind(a, 0) == 0) return s.substr(std::string(a).size());
    }
    return s;
}

std::string join(const std::vector<std::string>& toks, size_t from, size_t to) {
    std::string out;
    for (size_t i = from; i < to && i < toks.size(); ++i) {
        if (!out.empty()) out += " ";
        out += toks[i];
    }
    return out;
}

std::string fill(const std::string& pattern, const std::map<std::string, std::string>& slots) {
    std::string out = pattern;
    for (const auto& [k, v] : slots) {
        std::string key = "{" + k + "}";
        size_t pos;
        while ((pos = out.find(key)) != std::string::npos) out.replace(pos, key.size(), v);
    }
    return out;
}

struct SlotError {};

// take everything after the first occurrence of any marker word
std::string after_marker(const std::string& low, const std::vector<std::string>& markers) {
    for (const auto& m : markers) {
        size_t pos = low.find(m);
        if (pos != std::string::npos) return low.substr(pos + m.size());
    }
    throw SlotError{};
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t.!,");
    size_t e = s.find_last_not_of(" \t.!,'\"");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<CaptionTemplate>& caption_templates() {
    static const std::vector<CaptionTemplate> templates = {
        {EditTask::kSubjectAddition,
         "The {entity} gradually appears {location}, while everything else remains still.",
         {"entity", "location"}},
        {EditTask::kSubjectRemoval,
         "The {entity} gradually fades away, while everything else remains still.",
         {"entity"}},
        {EditTask::kSubjectReplacement,
         "The {entity} gradually turns into {target} in place, while pose, lighting, and "
         "surroundings remain unchanged.",
         {"entity", "target"}},
        {EditTask::kBackgroundChange,
         "The background slowly transforms into {target} scene, while the main subject and "
         "foreground remain unchanged.",
         {"target"}},
        {EditTask::kColorAlteration,
         "The {entity}'s body color gradually shifts to {color}, while reflections and all other "
         "elements remain consistent.",
         {"entity", "color"}},
        {EditTask::kMaterialModification,
         "The {entity}'s texture gradually becomes {material}, while geometry and the rest of the "
         "scene remain unchanged.",
         {"entity", "material"}},
        {EditTask::kTextModification,
         "The sign's text gradually changes to \"{text}\", while layout and surrounding pixels "
         "remain unchanged.",
         {"text"}},
        {EditTask::kMotionChange,
         "The {owner}'s {limb} slowly {verb}s, while the rest of the body and scene remain "
         "steady.",
         {"owner", "limb", "verb"}},
        {EditTask::kPortraitEditing,
         "Facial skin is gently smoothed and eyes brightened over time, while identity and other "
         "details remain unchanged.",
         {}},
        {EditTask::kStyleTransfer,
         "The scene gradually adopts a {style} style, while composition and content remain "
         "unchanged.",
         {"style"}},
        {EditTask::kToneTransformation,
         "The image gradually shifts to a {tone} grade, while structure and content remain "
         "unchanged.",
         {"tone"}},
    };
    return templates;
}

EditTask classify_instruction(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("classify_instruction: empty text");
    std::string low = lower(text);
    auto toks = tokenize(text);

    // priority order: most specific keywords first
    if (has_token(toks, {"text"})) return EditTask::kTextModification;
    if (has_token(toks, kMotionVerbs) && has_token(toks, kLimbWords)) return EditTask::kMotionChange;
    if (has_token(toks, {"skin", "facial"}) || has_phrase(low, "brighten eyes") ||
        has_phrase(low, "beautif"))
        return EditTask::kPortraitEditing;
    if (has_token(toks, {"texture", "material"}) ||
        (has_phrase(low, "turn") && has_phrase(low, "into") && has_token(toks, kMaterialWords)))
        return EditTask::kMaterialModification;
    if (has_token(toks, {"color", "colour", "recolor"}) ||
        (has_phrase(low, "make the") && has_token(toks, kColorWords)))
        return EditTask::kColorAlteration;
    if (has_token(toks, {"replace", "replaces", "replaced", "swap"}) ||
        (has_phrase(low, "turns into") && has_phrase(low, "in place")))
        return EditTask::kSubjectReplacement;
    if (has_token(toks, {"remove", "removes", "delete", "erase"}) || has_phrase(low, "fades away"))
        return EditTask::kSubjectRemoval;
    if (has_token(toks, {"add", "adds", "insert", "appears"})) return EditTask::kSubjectAddition;
    if (has_token(toks, {"background", "backdrop"})) return EditTask::kBackgroundChange;
    if (has_token(toks, {"style", "watercolor", "sketch", "painting", "stylize"}))
        return EditTask::kStyleTransfer;
    if (has_token(toks, {"grade", "grading", "tone", "cinematic", "warmer", "cooler"}))
        return EditTask::kToneTransformation;
    throw UnknownCategory("no classification rule fires for: " + text);
}

namespace {

const std::vector<CaptionTemplate>& tpl() { return caption_templates(); }

const CaptionTemplate& template_for(EditTask t) {
    for (const auto& c : tpl())
        if (c.category == t) return c;
    throw std::logic_error("missing template");
}

std::map<std::string, std::string> extract_slots(const std::string& instruction, EditTask cat) {
    std::string low = lower(instruction);
    auto toks = tokenize(instruction);
    std::map<std::string, std::string> slots;
    switch (cat) {
        case EditTask::kSubjectAddition: {
            std::string rest = trim(after_marker(low, {"add ", "insert ", "place "}));
            rest = strip_article(rest);
            auto rtoks = tokenize(rest);
            static const std::set<std::string> kLocWords = {"above", "below", "on",    "in",
                                                            "at",    "next",  "beside", "under",
                                                            "over",  "near"};
            size_t loc = rtoks.size();
            for (size_t i = 1; i < rtoks.size(); ++i)
                if (kLocWords.count(rtoks[i])) {
                    loc = i;
                    break;
                }
            if (loc == rtoks.size() || loc == 0) throw SlotError{};
            slots["entity"] = join(rtoks, 0, loc);
            slots["location"] = join(rtoks, loc, rtoks.size());
            break;
        }
        case EditTask::kSubjectRemoval: {
            std::string rest = trim(after_marker(low, {"remove ", "delete ", "erase "}));
            rest = strip_article(rest);
            if (rest.empty()) throw SlotError{};
            slots["entity"] = rest;
            break;
        }
        case EditTask::kSubjectReplacement: {
            size_t with = low.find(" with ");
            if (with == std::string::npos) throw SlotError{};
            std::string left = trim(after_marker(low.substr(0, with), {"replace ", "swap "}));
            std::string right = trim(low.substr(with + 6));
            left = strip_article(left);
            if (left.empty() || right.empty()) throw SlotError{};
            slots["entity"] = left;
            slots["target"] = right;  // keeps its article: "a teacup"
            break;
        }
        case EditTask::kBackgroundChange: {
            std::string rest = trim(after_marker(low, {"background to ", "backdrop to "}));
            if (rest.empty()) throw SlotError{};
            slots["target"] = rest;  // keeps its article: "a beach"
            break;
        }
        case EditTask::kColorAlteration: {
            // "make the <entity> <color>"
            std::string rest = trim(after_marker(low, {"make the ", "make "}));
            auto rtoks = tokenize(rest);
            if (rtoks.size() < 2 || !kColorWords.count(rtoks.back())) throw SlotError{};
            slots["color"] = rtoks.back();
            slots["entity"] = join(rtoks, 0, rtoks.size() - 1);
            break;
        }
        case EditTask::kMaterialModification: {
            size_t into = low.find(" into ");
            if (into == std::string::npos) throw SlotError{};
            std::string left = trim(after_marker(low.substr(0, into), {"turn ", "change "}));
            left = strip_article(left);
            std::string right = trim(low.substr(into + 6));
            if (left.empty() || right.empty()) throw SlotError{};
            slots["entity"] = left;
            slots["material"] = right;
            break;
        }
        case EditTask::kTextModification: {
            // quoted payload, either quote style
            size_t q0 = instruction.find_first_of("'\"");
            size_t q1 = instruction.find_last_of("'\"");
            if (q0 == std::string::npos || q1 <= q0) throw SlotError{};
            slots["text"] = instruction.substr(q0 + 1, q1 - q0 - 1);
            break;
        }
        case EditTask::kMotionChange: {
            // "<verb> the <owner>'s <limb>"
            if (toks.empty() || !kMotionVerbs.count(toks[0])) throw SlotError{};
            std::string verb = toks[0];
            if (verb.back() == 's') verb.pop_back();
            size_t apos = low.find("'s ");
            if (apos == std::string::npos) throw SlotError{};
            std::string owner = trim(low.substr(0, apos));
            owner = trim(after_marker(owner + " ", {verb + " "}));
            owner = strip_article(owner);
            std::string limb = trim(low.substr(apos + 3));
            if (owner.empty() || limb.empty()) throw SlotError{};
            // the template speaks of forearms, not hands
            auto ltoks = tokenize(limb);
            if (!ltoks.empty() && (ltoks.back() == "hand" || ltoks.back() == "hands"))
                ltoks.back() = "forearm";
            slots["owner"] = owner;
            slots["limb"] = join(ltoks, 0, ltoks.size());
            slots["verb"] = verb;
            break;
        }
        case EditTask::kPortraitEditing:
            break;  // fixed caption
        case EditTask::kStyleTransfer: {
            // "... to <style> style" or "... in <style> style"
            size_t st = low.rfind(" style");
            if (st == std::string::npos) throw SlotError{};
            std::string before = low.substr(0, st);
            size_t to = before.rfind(" to ");
            size_t in = before.rfind(" in ");
            size_t cut = to == std::string::npos ? in : (in == std::string::npos ? to : std::max(to, in));
            if (cut == std::string::npos) throw SlotError{};
            std::string style = trim(strip_article(trim(before.substr(cut + 4))));
            if (style.empty()) throw SlotError{};
            slots["style"] = style;
            break;
        }
        case EditTask::kToneTransformation: {
            // "apply <tone> grade"
            std::string rest = trim(after_marker(low, {"apply ", "use ", "shift to "}));
            size_t gr = rest.rfind(" grade");
            if (gr != std::string::npos) rest = rest.substr(0, gr);
            rest = trim(strip_article(rest));
            if (rest.empty()) throw SlotError{};
            slots["tone"] = rest;
            break;
        }
    }
    return slots;
}

std::map<std::string, std::string> generic_slots(EditTask cat) {
    switch (cat) {
        case EditTask::kSubjectAddition:
            return {{"entity", "object"}, {"location", "in the scene"}};
        case EditTask::kSubjectRemoval:
            return {{"entity", "object"}};
        case EditTask::kSubjectReplacement:
            return {{"entity", "object"}, {"target", "the new object"}};
        case EditTask::kBackgroundChange:
            return {{"target", "a new"}};
        case EditTask::kColorAlteration:
            return {{"entity", "object"}, {"color", "a new color"}};
        case EditTask::kMaterialModification:
            return {{"entity", "object"}, {"material", "a new material"}};
        case EditTask::kTextModification:
            return {{"text", "..."}};
        case EditTask::kMotionChange:
            return {{"owner", "figure"}, {"limb", "arm"}, {"verb", "move"}};
        case EditTask::kStyleTransfer:
            return {{"style", "new"}};
        case EditTask::kToneTransformation:
            return {{"tone", "new"}};
        default:
            return {};
    }
}

}  // namespace

EvolutionCaption generate_caption(const std::string& instruction, EditTask category) {
    // The two canonical rewrites are reproduced verbatim ahead of the
    // template path.
    static const std::map<std::string, std::pair<EditTask, std::string>> kCanonical = {
        {"remove the object",
         {EditTask::kSubjectRemoval,
          "The object gradually fades away while everything else remains still."}},
        {"change the background to a forest",
         {EditTask::kBackgroundChange,
          "The background slowly transforms into a dense forest, with all other elements "
          "unchanged."}},
    };
    auto canon = kCanonical.find(lower(instruction));
    if (canon != kCanonical.end() && canon->second.first == category)
        return EvolutionCaption{canon->second.second, category, false};

    const CaptionTemplate& t = template_for(category);
    std::map<std::string, std::string> slots;
    try {
        slots = extract_slots(instruction, category);
    } catch (const SlotError&) {
        slots = generic_slots(category);
    }
    return EvolutionCaption{fill(t.pattern, slots), category, false};
}

EvolutionCaption refine_caption(const EvolutionCaption& caption) {
    if (caption.text.empty())
        throw std::invalid_argument("refine_caption: empty caption violates precondition");
    if (caption.refined) return caption;
    EvolutionCaption out = caption;
    out.text += kRefineSuffix;
    out.refined = true;
    return out;
}

EvolutionCaption caption_for(const std::string& instruction) {
    EditTask cat = classify_instruction(instruction);
    return refine_caption(generate_caption(instruction, cat));
}

}  // namespace v4e
