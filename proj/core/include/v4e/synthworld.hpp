#ifndef V4E_SYNTHWORLD_HPP
#define V4E_SYNTHWORLD_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "v4e/image.hpp"

namespace v4e {

// The 11 editing task categories.
enum class EditTask {
    kSubjectAddition = 0,
    kSubjectRemoval,
    kSubjectReplacement,
    kBackgroundChange,
    kColorAlteration,
    kMaterialModification,
    kTextModification,
    kMotionChange,
    kPortraitEditing,
    kStyleTransfer,
    kToneTransformation,
};

inline constexpr int kNumEditTasks = 11;

const std::array<EditTask, kNumEditTasks>& all_edit_tasks();
std::string task_name(EditTask t);   // display name, e.g. "Portrait Editing & Beautification"
std::string task_slug(EditTask t);   // file-safe name, e.g. "portrait_editing"
EditTask task_from_string(const std::string& s);  // accepts either form

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ShapeKind { kCircle, kSquare, kTriangle, kStickFigure, kGlyphGrid };
enum class TextureTag { kFlat, kStriped, kNoisy };
enum class BackgroundKind { kSolid, kGradient, kChecker };

struct Rgb {
    double r = 0, g = 0, b = 0;
};

struct SceneObject {
    ShapeKind kind = ShapeKind::kCircle;
    double cx = 0, cy = 0;   // pixels
    double size = 0;         // pixels
    Rgb color;
    TextureTag texture = TextureTag::kFlat;
    int color_name = 0;      // index into the named object palette
    uint64_t noise_seed = 0;
    double arm_angle = 0;    // stick figure only, radians, >0 raised
    std::string text;        // glyph grid only
    bool face = false;       // portrait target (circle with eyes + mouth)
};

struct Background {
    BackgroundKind kind = BackgroundKind::kSolid;
    Rgb pal0, pal1;
    int color_name = 0;
    bool horizontal = false;  // gradient axis
    int cell = 4;             // checker cell size
};

// Per-channel affine tone map v -> gain*v + shift with gain+shift <= 1, so
// the curve never clips on [0,1] and stays monotone.
struct Tone {
    std::array<double, 3> gain{1, 1, 1};
    std::array<double, 3> shift{0, 0, 0};
};

struct Scene {
    std::vector<SceneObject> objects;
    Background background;
    Tone tone;
};

struct EditTriplet {
    std::string instruction;
    Image source;
    Image edited;
    Mask mask;
    EditTask task = EditTask::kSubjectAddition;
    Scene scene_src;
    Scene scene_edit;
    uint64_t seed = 0;
    int resolution = 0;

    std::string id() const;
    bool global_mask() const { return mask.all_ones(); }
};

struct EvolutionClip {
    VideoClip frames;
    std::vector<double> alphas;  // alphas[0]=0, alphas[F-1]=1, strictly increasing
};

struct TaskDistribution {
    std::array<double, kNumEditTasks> share{};

    // Normalized per-task shares used by the training mix; the raw column
    // sums to 101.1%, so shares are divided by their sum on construction.
    static TaskDistribution paper_mix();
    static TaskDistribution uniform();

    void normalize();
};

Scene sample_scene(uint64_t seed, int resolution = 32);
EditTriplet make_triplet(uint64_t seed, EditTask task, int resolution);
EvolutionClip make_evolution_clip(const EditTriplet& triplet, int frames);

// Training and evaluation draw triplet seeds from disjoint halves of the
// seed space (top bit clear = train, set = eval).
enum class SeedSpace { kTrain, kEval };
uint64_t triplet_seed(uint64_t stream_seed, uint64_t index, SeedSpace space);

// Infinite deterministic stream of triplets at the given task distribution.
class BalancedSampler {
public:
    BalancedSampler(TaskDistribution dist, uint64_t seed, int resolution = 32,
                    SeedSpace space = SeedSpace::kTrain);

    EditTriplet next();
    EditTask next_task();  // advances the same category stream without rendering

    const TaskDistribution& distribution() const { return dist_; }

private:
    TaskDistribution dist_;
    uint64_t stream_seed_;
    int resolution_;
    SeedSpace space_;
    uint64_t index_ = 0;
    std::vector<double> weights_;
    uint64_t category_counter_ = 0;
    // category draws come from their own stream so next_task() and next()
    // stay aligned
    uint64_t cat_seed_;
};

}  // namespace v4e

#endif
