#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "v4e/dataset.hpp"
#include "v4e/synthworld.hpp"

using namespace v4e;

namespace {

bool images_equal(const Image& a, const Image& b) {
    return a.h == b.h && a.w == b.w && a.px == b.px;
}

bool scenes_equal(const Scene& a, const Scene& b) {
    if (a.objects.size() != b.objects.size()) return false;
    for (size_t i = 0; i < a.objects.size(); ++i) {
        const auto &x = a.objects[i], &y = b.objects[i];
        if (x.kind != y.kind || x.cx != y.cx || x.cy != y.cy || x.size != y.size ||
            x.color.r != y.color.r || x.texture != y.texture || x.text != y.text ||
            x.arm_angle != y.arm_angle)
            return false;
    }
    return a.background.kind == b.background.kind && a.tone.gain == b.tone.gain;
}

}  // namespace

TEST_CASE("task names match the published taxonomy") {
    CHECK(task_name(EditTask::kSubjectAddition) == "Subject Addition");
    CHECK(task_name(EditTask::kToneTransformation) == "Tone Transformation");
    CHECK(task_name(EditTask::kPortraitEditing) == "Portrait Editing & Beautification");
    CHECK(all_edit_tasks().size() == 11);
    std::set<std::string> names;
    for (EditTask t : all_edit_tasks()) {
        names.insert(task_name(t));
        CHECK(task_from_string(task_name(t)) == t);
        CHECK(task_from_string(task_slug(t)) == t);
    }
    CHECK(names.size() == 11);
    CHECK_THROWS(task_from_string("Subject Summoning"));
}

TEST_CASE("sample_scene is deterministic and respects invariants") {
    Scene a = sample_scene(0, 32);
    Scene b = sample_scene(0, 32);
    CHECK(scenes_equal(a, b));

    Scene c = sample_scene(1, 32);
    CHECK(!scenes_equal(a, c));

    for (uint64_t seed = 0; seed < 40; ++seed) {
        Scene s = sample_scene(seed, 32);
        CHECK(s.objects.size() >= 1);
        CHECK(s.objects.size() <= 4);
        // all object regions inside the canvas: border pixels carry no coverage
        for (EditTask task : {EditTask::kSubjectRemoval}) {
            EditTriplet t = make_triplet(seed, task, 32);
            (void)t;  // construction runs the internal leak check
        }
    }
}

TEST_CASE("triplets are pure functions of (seed, task, resolution)") {
    for (EditTask task : all_edit_tasks()) {
        EditTriplet a = make_triplet(7, task, 32);
        EditTriplet b = make_triplet(7, task, 32);
        CHECK(a.instruction == b.instruction);
        CHECK(images_equal(a.source, b.source));
        CHECK(images_equal(a.edited, b.edited));
        CHECK(a.mask.px == b.mask.px);
    }
}

TEST_CASE("local tasks are bit-identical outside the mask; global tasks are all-ones") {
    for (EditTask task : all_edit_tasks()) {
        for (uint64_t seed : {3ull, 11ull, 42ull}) {
            EditTriplet t = make_triplet(seed, task, 32);
            bool global = task == EditTask::kStyleTransfer || task == EditTask::kToneTransformation;
            CHECK(t.mask.all_ones() == global);
            double leak = 0;
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    if (t.mask.at(y, x)) continue;
                    for (int c = 0; c < 3; ++c)
                        leak += std::abs(t.source.at(y, x, c) - t.edited.at(y, x, c));
                }
            CHECK(leak == 0.0);
            // the edit actually changes something
            bool changed = !images_equal(t.source, t.edited);
            CHECK(changed);
        }
    }
}

TEST_CASE("removal mask covers exactly the removed object's dilated region") {
    EditTriplet t = make_triplet(7, EditTask::kSubjectRemoval, 32);
    // diff support must be nonempty and inside the mask
    size_t diff_px = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            bool d = false;
            for (int c = 0; c < 3; ++c) d |= t.source.at(y, x, c) != t.edited.at(y, x, c);
            if (d) {
                ++diff_px;
                CHECK(t.mask.at(y, x) == 1);
            }
        }
    CHECK(diff_px > 0);
    CHECK(t.mask.count() >= diff_px);
    // removing = repainting with background: edited scene has one fewer object
    CHECK(t.scene_edit.objects.size() + 1 == t.scene_src.objects.size());
}

TEST_CASE("tone transformation applies a monotone per-channel curve") {
    EditTriplet t = make_triplet(5, EditTask::kToneTransformation, 32);
    CHECK(t.mask.all_ones());
    // fit: collect (in, out) pairs per channel, sort by input, check monotone
    for (int c = 0; c < 3; ++c) {
        std::map<double, double> curve;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) curve[t.source.at(y, x, c)] = t.edited.at(y, x, c);
        double prev = -1;
        for (auto& [in, out] : curve) {
            CHECK(out >= prev - 1e-12);
            prev = out;
        }
    }
}

TEST_CASE("evolution clips anchor bit-exactly and fade per the task law") {
    EditTriplet t = make_triplet(7, EditTask::kSubjectRemoval, 32);
    EvolutionClip clip = make_evolution_clip(t, 8);
    CHECK(clip.frames.f() == 8);
    CHECK(images_equal(clip.frames.frames[0], t.source));
    CHECK(images_equal(clip.frames.frames[7], t.edited));
    for (int f = 0; f < 8; ++f)
        CHECK(clip.alphas[static_cast<size_t>(f)] == doctest::Approx(f / 7.0));

    // interior frame: removal renders the object at opacity 1 - alpha, which
    // equals a pixel crossfade source -> edited (tone map is affine and unclipped)
    int f = 4;
    double alpha = clip.alphas[static_cast<size_t>(f)];
    const Image& mid = clip.frames.frames[static_cast<size_t>(f)];
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) {
                double expect = t.source.at(y, x, c) +
                                alpha * (t.edited.at(y, x, c) - t.source.at(y, x, c));
                CHECK(mid.at(y, x, c) == doctest::Approx(expect).epsilon(1e-9));
            }
}

TEST_CASE("clip frames outside the mask are constant for every local task") {
    for (EditTask task : all_edit_tasks()) {
        EditTriplet t = make_triplet(13, task, 32);
        if (t.mask.all_ones()) continue;
        EvolutionClip clip = make_evolution_clip(t, 8);
        for (int f = 1; f < 8; ++f) {
            const Image& fr = clip.frames.frames[static_cast<size_t>(f)];
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    if (t.mask.at(y, x)) continue;
                    for (int c = 0; c < 3; ++c) {
                        REQUIRE(fr.at(y, x, c) == t.source.at(y, x, c));
                    }
                }
        }
    }
}

TEST_CASE("clip frame count validation") {
    EditTriplet t = make_triplet(1, EditTask::kColorAlteration, 32);
    CHECK_THROWS_AS(make_evolution_clip(t, 6), std::invalid_argument);
    CHECK_THROWS_AS(make_evolution_clip(t, 0), std::invalid_argument);
    CHECK(make_evolution_clip(t, 4).frames.f() == 4);
    CHECK(make_evolution_clip(t, 12).frames.f() == 12);
}

TEST_CASE("paper task distribution is normalized from the published column") {
    TaskDistribution d = TaskDistribution::paper_mix();
    double sum = 0;
    for (double v : d.share) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // raw column sums to 101.1, so each share is raw/101.1
    CHECK(d.share[0] == doctest::Approx(7.6 / 101.1).epsilon(1e-9));
    CHECK(d.share[5] == doctest::Approx(12.2 / 101.1).epsilon(1e-9));
}

TEST_CASE("balanced sampler tracks the target distribution within 1.5 points") {
    const int kDraws = 10000;
    TaskDistribution d = TaskDistribution::paper_mix();
    BalancedSampler sampler(d, 1, 32);
    std::array<int, kNumEditTasks> counts{};
    for (int i = 0; i < kDraws; ++i) counts[static_cast<size_t>(sampler.next_task())]++;

    double chi2 = 0;
    for (int t = 0; t < kNumEditTasks; ++t) {
        double expect = d.share[static_cast<size_t>(t)] * kDraws;
        double got = counts[static_cast<size_t>(t)];
        CHECK(std::abs(got / kDraws - d.share[static_cast<size_t>(t)]) < 0.015);
        chi2 += (got - expect) * (got - expect) / expect;
    }
    // chi-square critical value at p=0.01, 10 dof
    CHECK(chi2 < 23.21);
}

TEST_CASE("uniform sampler stays within 1.5 points of 1/11") {
    BalancedSampler sampler(TaskDistribution::uniform(), 2, 32);
    std::array<int, kNumEditTasks> counts{};
    for (int i = 0; i < 10000; ++i) counts[static_cast<size_t>(sampler.next_task())]++;
    for (int t = 0; t < kNumEditTasks; ++t)
        CHECK(std::abs(counts[static_cast<size_t>(t)] / 10000.0 - 1.0 / 11) < 0.015);
}

TEST_CASE("same sampler seed reproduces the first 100 tasks and triplets differ across draws") {
    BalancedSampler a(TaskDistribution::paper_mix(), 9, 32);
    BalancedSampler b(TaskDistribution::paper_mix(), 9, 32);
    for (int i = 0; i < 100; ++i) CHECK(a.next_task() == b.next_task());

    BalancedSampler c(TaskDistribution::paper_mix(), 9, 32);
    EditTriplet t0 = c.next();
    EditTriplet t1 = c.next();
    CHECK(t0.seed != t1.seed);
}

TEST_CASE("train and eval seed spaces are disjoint") {
    std::set<uint64_t> train, eval;
    for (uint64_t i = 0; i < 200; ++i) {
        train.insert(triplet_seed(1, i, SeedSpace::kTrain));
        eval.insert(triplet_seed(1, i, SeedSpace::kEval));
    }
    for (uint64_t s : train) CHECK((s & 0x8000000000000000ull) == 0);
    for (uint64_t s : eval) CHECK((s & 0x8000000000000000ull) != 0);
}

TEST_CASE("dataset export writes a loadable manifest and faithful pngs") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "v4e_dataset_test";
    fs::remove_all(dir);
    auto man = export_dataset(dir.string(), 6, TaskDistribution::uniform(), 5, 32, 8);
    CHECK(man.records.size() == 6);

    auto loaded = load_manifest(dir.string());
    CHECK(loaded.resolution == 32);
    CHECK(loaded.clip_frames == 8);
    CHECK(loaded.records.size() == 6);
    for (size_t i = 0; i < 6; ++i) {
        CHECK(loaded.records[i].id == man.records[i].id);
        CHECK(loaded.records[i].seed == man.records[i].seed);
        EditTriplet regen = regenerate(loaded.records[i], loaded.resolution);
        // exported png is the quantized render
        Image png = read_png((dir / loaded.records[i].src_path).string());
        double max_err = 0;
        for (size_t p = 0; p < png.px.size(); ++p)
            max_err = std::max(max_err, std::abs(png.px[p] - regen.source.px[p]));
        CHECK(max_err <= 0.5 / 255.0 + 1e-9);
        CHECK(loaded.records[i].clip_paths.size() == 8);
    }
    fs::remove_all(dir);
}
