#include <doctest.h>

#include "v4e/icg.hpp"
#include "v4e/synthworld.hpp"

using namespace v4e;

TEST_CASE("classification of the published instruction cues") {
    CHECK(classify_instruction("add a red balloon above the boy") == EditTask::kSubjectAddition);
    CHECK(classify_instruction("remove the trash can on the left") == EditTask::kSubjectRemoval);
    CHECK(classify_instruction("replace the mug with a teacup") == EditTask::kSubjectReplacement);
    CHECK(classify_instruction("change background to a beach") == EditTask::kBackgroundChange);
    CHECK(classify_instruction("make the car blue") == EditTask::kColorAlteration);
    CHECK(classify_instruction("turn the sofa into leather") == EditTask::kMaterialModification);
    CHECK(classify_instruction("change text to 'OPEN'") == EditTask::kTextModification);
    CHECK(classify_instruction("raise the person's right hand") == EditTask::kMotionChange);
    CHECK(classify_instruction("smooth skin and brighten eyes") == EditTask::kPortraitEditing);
    CHECK(classify_instruction("convert to watercolor style") == EditTask::kStyleTransfer);
    CHECK(classify_instruction("apply warm cinematic grade") == EditTask::kToneTransformation);
}

TEST_CASE("unknown instructions raise UnknownCategory") {
    CHECK_THROWS_AS(classify_instruction("frobnicate the widget"), UnknownCategory);
    CHECK_THROWS_AS(classify_instruction(""), std::invalid_argument);
}

TEST_CASE("the canonical rewrite examples are reproduced verbatim") {
    auto c1 = generate_caption("Remove the object", EditTask::kSubjectRemoval);
    CHECK(c1.text == "The object gradually fades away while everything else remains still.");
    auto c2 = generate_caption("Change the background to a forest", EditTask::kBackgroundChange);
    CHECK(c2.text ==
          "The background slowly transforms into a dense forest, with all other elements "
          "unchanged.");
}

TEST_CASE("all 11 template instantiations on the published cues") {
    auto gen = [](const std::string& instr) {
        EditTask cat = classify_instruction(instr);
        return generate_caption(instr, cat).text;
    };
    CHECK(gen("add a red balloon above the boy") ==
          "The red balloon gradually appears above the boy, while everything else remains still.");
    CHECK(gen("remove the trash can on the left") ==
          "The trash can on the left gradually fades away, while everything else remains still.");
    CHECK(gen("replace the mug with a teacup") ==
          "The mug gradually turns into a teacup in place, while pose, lighting, and surroundings "
          "remain unchanged.");
    CHECK(gen("change background to a beach") ==
          "The background slowly transforms into a beach scene, while the main subject and "
          "foreground remain unchanged.");
    CHECK(gen("make the car blue") ==
          "The car's body color gradually shifts to blue, while reflections and all other "
          "elements remain consistent.");
    CHECK(gen("turn the sofa into leather") ==
          "The sofa's texture gradually becomes leather, while geometry and the rest of the scene "
          "remain unchanged.");
    CHECK(gen("change text to 'OPEN'") ==
          "The sign's text gradually changes to \"OPEN\", while layout and surrounding pixels "
          "remain unchanged.");
    CHECK(gen("raise the person's right hand") ==
          "The person's right forearm slowly raises, while the rest of the body and scene remain "
          "steady.");
    CHECK(gen("smooth skin and brighten eyes") ==
          "Facial skin is gently smoothed and eyes brightened over time, while identity and other "
          "details remain unchanged.");
    CHECK(gen("convert to watercolor style") ==
          "The scene gradually adopts a watercolor style, while composition and content remain "
          "unchanged.");
    CHECK(gen("apply warm cinematic grade") ==
          "The image gradually shifts to a warm cinematic grade, while structure and content "
          "remain unchanged.");
}

TEST_CASE("refinement appends the suffix exactly once and is idempotent") {
    EvolutionCaption c{"X.", EditTask::kStyleTransfer, false};
    auto r = refine_caption(c);
    CHECK(r.text ==
          "X. The video is high-resolution and high-quality, and the overall evolution is "
          "temporally coherent.");
    CHECK(r.refined);
    auto rr = refine_caption(r);
    CHECK(rr.text == r.text);

    size_t first = r.text.find("high-resolution");
    CHECK(first != std::string::npos);
    CHECK(r.text.find("high-resolution", first + 1) == std::string::npos);

    EvolutionCaption empty{"", EditTask::kStyleTransfer, false};
    CHECK_THROWS_AS(refine_caption(empty), std::invalid_argument);
}

TEST_CASE("slot extraction failure falls back to the generic entity") {
    auto c = generate_caption("remove", EditTask::kSubjectRemoval);
    CHECK(c.text == "The object gradually fades away, while everything else remains still.");
}

TEST_CASE("classify-generate round trip over the synthworld grammar") {
    // every caption generated for category C classifies back to C
    for (EditTask task : all_edit_tasks()) {
        for (uint64_t seed : {1ull, 23ull, 77ull, 301ull, 999ull}) {
            EditTriplet t = make_triplet(seed, task, 32);
            EditTask cat = classify_instruction(t.instruction);
            CHECK(cat == task);
            auto caption = generate_caption(t.instruction, cat);
            CHECK(classify_instruction(caption.text) == task);
            auto refined = refine_caption(caption);
            CHECK(classify_instruction(refined.text) == task);
        }
    }
}

TEST_CASE("templates declare every slot they use") {
    for (const auto& t : caption_templates()) {
        size_t pos = 0;
        while ((pos = t.pattern.find('{', pos)) != std::string::npos) {
            size_t end = t.pattern.find('}', pos);
            REQUIRE(end != std::string::npos);
            std::string slot = t.pattern.substr(pos + 1, end - pos - 1);
            bool declared = false;
            for (const auto& s : t.slots) declared |= s == slot;
            CHECK(declared);
            pos = end;
        }
    }
    CHECK(caption_templates().size() == 11);
}
