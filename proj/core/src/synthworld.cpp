#include "v4e/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "v4e/rng.hpp"

namespace v4e {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---- task table ----

struct TaskInfo {
    EditTask task;
    const char* name;
    const char* slug;
};

constexpr TaskInfo kTasks[kNumEditTasks] = {
    {EditTask::kSubjectAddition, "Subject Addition", "subject_addition"},
    {EditTask::kSubjectRemoval, "Subject Removal", "subject_removal"},
    {EditTask::kSubjectReplacement, "Subject Replacement", "subject_replacement"},
    {EditTask::kBackgroundChange, "Background Change", "background_change"},
    {EditTask::kColorAlteration, "Color Alteration", "color_alteration"},
    {EditTask::kMaterialModification, "Material Modification", "material_modification"},
    {EditTask::kTextModification, "Text Modification", "text_modification"},
    {EditTask::kMotionChange, "Motion Change", "motion_change"},
    {EditTask::kPortraitEditing, "Portrait Editing & Beautification", "portrait_editing"},
    {EditTask::kStyleTransfer, "Style Transfer", "style_transfer"},
    {EditTask::kToneTransformation, "Tone Transformation", "tone_transformation"},
};

// ---- palettes ----

struct NamedColor {
    const char* name;
    Rgb rgb;
};

constexpr int kNumObjectColors = 8;
const NamedColor kObjectColors[kNumObjectColors] = {
    {"red", {0.85, 0.16, 0.16}},   {"green", {0.18, 0.72, 0.25}},
    {"blue", {0.20, 0.35, 0.85}},  {"yellow", {0.90, 0.85, 0.20}},
    {"purple", {0.60, 0.25, 0.75}}, {"orange", {0.95, 0.55, 0.15}},
    {"cyan", {0.20, 0.80, 0.80}},  {"white", {0.95, 0.95, 0.95}},
};

Rgb scale_rgb(Rgb c, double k) { return {c.r * k, c.g * k, c.b * k}; }

Rgb lerp_rgb(Rgb a, Rgb b, double t) {
    return {a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b)};
}

// ---- 5x7 glyph font ----

constexpr const char* kGlyphAlphabet = "ACEHLNOPSTXZ0137";

const std::map<char, std::array<uint8_t, 7>>& glyph_font() {
    static const std::map<char, std::array<uint8_t, 7>> font = {
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
        {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
        {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'3', {0x1E, 0x01, 0x01, 0x0E, 0x01, 0x01, 0x1E}},
        {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    };
    return font;
}

// ---- deterministic per-pixel noise in [-1, 1] ----

double pixel_noise(uint64_t seed, int x, int y) {
    uint64_t h = mix64(seed ^ (static_cast<uint64_t>(static_cast<uint32_t>(x)) << 32 |
                               static_cast<uint32_t>(y)));
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

// ---- geometry ----

struct Box {
    double x0, y0, x1, y1;
    bool intersects(const Box& o, double gap) const {
        return !(x1 + gap < o.x0 || o.x1 + gap < x0 || y1 + gap < o.y0 || o.y1 + gap < y0);
    }
};

double dist_point_segment(double px, double py, double ax, double ay, double bx, double by) {
    double vx = bx - ax, vy = by - ay;
    double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

struct StickLayout {
    double head_cx, head_cy, head_r;
    double trunk_x, trunk_y0, trunk_y1;
    double leg_y0, leg_y1, leg_dx;
    double pivot_x, pivot_y, arm_len;
    double limb_w;
};

StickLayout stick_layout(const SceneObject& o) {
    double s = o.size;
    StickLayout l;
    l.head_cx = o.cx;
    l.head_cy = o.cy - 0.34 * s;
    l.head_r = 0.14 * s;
    l.trunk_x = o.cx;
    l.trunk_y0 = o.cy - 0.20 * s;
    l.trunk_y1 = o.cy + 0.20 * s;
    l.leg_y0 = o.cy + 0.20 * s;
    l.leg_y1 = o.cy + 0.48 * s;
    l.leg_dx = 0.16 * s;
    l.pivot_x = o.cx;
    l.pivot_y = o.cy - 0.12 * s;
    l.arm_len = 0.38 * s;
    l.limb_w = std::max(1.1, 0.06 * s);
    return l;
}

// Point-in-shape test for a subsample position, at a given arm angle for
// stick figures.
bool inside_shape(const SceneObject& o, double px, double py, double arm_angle) {
    switch (o.kind) {
        case ShapeKind::kCircle: {
            double r = o.size * 0.5;
            double dx = px - o.cx, dy = py - o.cy;
            return dx * dx + dy * dy <= r * r;
        }
        case ShapeKind::kSquare: {
            double h = o.size * 0.5;
            return std::abs(px - o.cx) <= h && std::abs(py - o.cy) <= h;
        }
        case ShapeKind::kTriangle: {
            // upward isosceles triangle in the size box
            double h = o.size * 0.5;
            double top_y = o.cy - h, bot_y = o.cy + h;
            if (py < top_y || py > bot_y) return false;
            double t = (py - top_y) / (bot_y - top_y);
            double half_w = t * h;
            return std::abs(px - o.cx) <= half_w;
        }
        case ShapeKind::kStickFigure: {
            StickLayout l = stick_layout(o);
            double hw = l.limb_w * 0.5;
            double dx = px - l.head_cx, dy = py - l.head_cy;
            if (dx * dx + dy * dy <= l.head_r * l.head_r) return true;
            if (dist_point_segment(px, py, l.trunk_x, l.trunk_y0, l.trunk_x, l.trunk_y1) <= hw)
                return true;
            if (dist_point_segment(px, py, l.trunk_x, l.leg_y0, l.trunk_x - l.leg_dx, l.leg_y1) <= hw)
                return true;
            if (dist_point_segment(px, py, l.trunk_x, l.leg_y0, l.trunk_x + l.leg_dx, l.leg_y1) <= hw)
                return true;
            double ex = l.pivot_x + l.arm_len * std::cos(arm_angle);
            double ey = l.pivot_y - l.arm_len * std::sin(arm_angle);
            return dist_point_segment(px, py, l.pivot_x, l.pivot_y, ex, ey) <= hw;
        }
        case ShapeKind::kGlyphGrid:
            return false;  // glyph grids are pixel-aligned, handled separately
    }
    return false;
}

// The arm sweeps [lo, hi]; a point is in the swept region iff its distance to
// the segment at the clamped polar angle is within the limb width. Exact for
// every intermediate angle, which keeps clip frames inside the motion mask.
bool inside_arm_sweep(const SceneObject& o, double px, double py, double lo, double hi) {
    StickLayout l = stick_layout(o);
    double phi = std::atan2(-(py - l.pivot_y), px - l.pivot_x);
    double th = std::clamp(phi, lo, hi);
    double ex = l.pivot_x + l.arm_len * std::cos(th);
    double ey = l.pivot_y - l.arm_len * std::sin(th);
    return dist_point_segment(px, py, l.pivot_x, l.pivot_y, ex, ey) <= l.limb_w * 0.5;
}

struct GlyphGeom {
    int x0, y0;   // integer top-left of the grid
    int scale;    // pixels per font dot
    int cols, rows;
};

GlyphGeom glyph_geom(const SceneObject& o) {
    GlyphGeom g;
    int n = static_cast<int>(o.text.size());
    g.scale = std::max(1, static_cast<int>(o.size / 9.0));
    g.cols = (6 * n - 1) * g.scale;
    g.rows = 7 * g.scale;
    g.x0 = static_cast<int>(std::lround(o.cx)) - g.cols / 2;
    g.y0 = static_cast<int>(std::lround(o.cy)) - g.rows / 2;
    return g;
}

// Pixel-aligned glyph coverage: exact 0/1 per pixel. Returns the index of the
// glyph cell covering the pixel, or -1.
int glyph_cell_at(const SceneObject& o, int x, int y) {
    GlyphGeom g = glyph_geom(o);
    int lx = x - g.x0, ly = y - g.y0;
    if (lx < 0 || ly < 0 || lx >= g.cols || ly >= g.rows) return -1;
    int cell = lx / (6 * g.scale);
    return cell;
}

bool glyph_dot_at(const SceneObject& o, const std::string& text, int x, int y) {
    GlyphGeom g = glyph_geom(o);
    int lx = x - g.x0, ly = y - g.y0;
    if (lx < 0 || ly < 0 || lx >= g.cols || ly >= g.rows) return false;
    int cell = lx / (6 * g.scale);
    int inx = lx - cell * 6 * g.scale;
    int col = inx / g.scale;
    if (col >= 5) return false;  // spacing column
    int row = ly / g.scale;
    if (cell >= static_cast<int>(text.size())) return false;
    auto it = glyph_font().find(text[static_cast<size_t>(cell)]);
    if (it == glyph_font().end()) return false;
    return (it->second[static_cast<size_t>(row)] >> (4 - col)) & 1;
}

Box object_box(const SceneObject& o) {
    switch (o.kind) {
        case ShapeKind::kStickFigure: {
            double e = 0.56 * o.size;
            return {o.cx - e, o.cy - e, o.cx + e, o.cy + e};
        }
        case ShapeKind::kGlyphGrid: {
            GlyphGeom g = glyph_geom(o);
            return {static_cast<double>(g.x0) - 1, static_cast<double>(g.y0) - 1,
                    static_cast<double>(g.x0 + g.cols), static_cast<double>(g.y0 + g.rows)};
        }
        default: {
            double h = o.size * 0.5 + 0.5;
            return {o.cx - h, o.cy - h, o.cx + h, o.cy + h};
        }
    }
}

// ---- rendering ----

Rgb background_at(const Background& bg, int x, int y, int res) {
    switch (bg.kind) {
        case BackgroundKind::kSolid:
            return bg.pal0;
        case BackgroundKind::kGradient: {
            double t = bg.horizontal ? static_cast<double>(x) / (res - 1)
                                     : static_cast<double>(y) / (res - 1);
            return lerp_rgb(bg.pal0, bg.pal1, t);
        }
        case BackgroundKind::kChecker: {
            bool odd = ((x / bg.cell) + (y / bg.cell)) & 1;
            return odd ? bg.pal1 : bg.pal0;
        }
    }
    return bg.pal0;
}

double texture_mod(TextureTag tag, const SceneObject& o, int x, int y, double noise_amp) {
    switch (tag) {
        case TextureTag::kFlat:
            return 1.0;
        case TextureTag::kStriped:
            return ((x + y) / 3) % 2 == 0 ? 1.0 : 0.62;
        case TextureTag::kNoisy:
            return 1.0 + noise_amp * pixel_noise(o.noise_seed, x, y);
    }
    return 1.0;
}

// Per-object rendering state after applying the morph at some alpha.
struct RenderObj {
    SceneObject obj;          // geometry + base fields (color may be lerped)
    double opacity = 1.0;
    double tex_mix = 0.0;     // material morph: blend toward texture2
    TextureTag texture2 = TextureTag::kFlat;
    double noise_amp = 0.22;
    Rgb eye_color{0.08, 0.08, 0.08};
};

constexpr std::array<std::pair<double, double>, 4> kSubsamples = {
    {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}}};

double coverage(const SceneObject& o, int x, int y) {
    if (o.kind == ShapeKind::kGlyphGrid)
        return glyph_dot_at(o, o.text, x, y) ? 1.0 : 0.0;
    int hits = 0;
    for (auto [sx, sy] : kSubsamples)
        hits += inside_shape(o, x + sx, y + sy, o.arm_angle) ? 1 : 0;
    return hits * 0.25;
}

// Face decorations (portrait target): two eyes and a mouth inside the circle.
double eye_coverage(const SceneObject& o, int x, int y) {
    double r = 0.09 * o.size;
    double exl = o.cx - 0.20 * o.size, exr = o.cx + 0.20 * o.size;
    double ey = o.cy - 0.12 * o.size;
    int hits = 0;
    for (auto [sx, sy] : kSubsamples) {
        double px = x + sx, py = y + sy;
        double dl = (px - exl) * (px - exl) + (py - ey) * (py - ey);
        double dr = (px - exr) * (px - exr) + (py - ey) * (py - ey);
        hits += (dl <= r * r || dr <= r * r) ? 1 : 0;
    }
    return hits * 0.25;
}

double mouth_coverage(const SceneObject& o, int x, int y) {
    double hw = 0.18 * o.size, hh = 0.045 * o.size;
    double my = o.cy + 0.20 * o.size;
    int hits = 0;
    for (auto [sx, sy] : kSubsamples) {
        double px = x + sx, py = y + sy;
        hits += (std::abs(px - o.cx) <= hw && std::abs(py - my) <= hh) ? 1 : 0;
    }
    return hits * 0.25;
}

Image render_scene(int res, const Background& bg, const Tone& tone,
                   const std::vector<RenderObj>& objs) {
    Image img(res, res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
            Rgb v = background_at(bg, x, y, res);
            for (const RenderObj& ro : objs) {
                if (ro.opacity <= 0.0) continue;
                double cov = coverage(ro.obj, x, y);
                if (cov <= 0.0) continue;
                double m0 = texture_mod(ro.obj.texture, ro.obj, x, y, ro.noise_amp);
                double m = ro.tex_mix == 0.0
                               ? m0
                               : (1.0 - ro.tex_mix) * m0 +
                                     ro.tex_mix * texture_mod(ro.texture2, ro.obj, x, y, ro.noise_amp);
                Rgb c = scale_rgb(ro.obj.color, m);
                c = {std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
                if (ro.obj.face) {
                    double ec = eye_coverage(ro.obj, x, y);
                    if (ec > 0) c = lerp_rgb(c, ro.eye_color, ec);
                    double mc = mouth_coverage(ro.obj, x, y);
                    if (mc > 0) c = lerp_rgb(c, Rgb{0.10, 0.06, 0.06}, mc);
                }
                v = lerp_rgb(v, c, ro.opacity * cov);
            }
            for (int ch = 0; ch < 3; ++ch) {
                double raw = ch == 0 ? v.r : (ch == 1 ? v.g : v.b);
                img.at(y, x, ch) = std::clamp(tone.gain[static_cast<size_t>(ch)] * raw +
                                                  tone.shift[static_cast<size_t>(ch)],
                                              0.0, 1.0);
            }
        }
    return img;
}

Mask rasterize_region(int res, const std::function<bool(int, int)>& pred) {
    Mask m(res, res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) m.at(y, x) = pred(x, y) ? 1 : 0;
    return m;
}

Mask object_region(int res, const SceneObject& o) {
    return rasterize_region(res, [&](int x, int y) { return coverage(o, x, y) > 0.0; });
}

Mask union_masks(const Mask& a, const Mask& b) {
    Mask out = a;
    for (size_t i = 0; i < out.px.size(); ++i) out.px[i] = out.px[i] || b.px[i];
    return out;
}

// ---- edit morph: parametric path from source (alpha 0) to edited (alpha 1) ----

struct ToneLerp {
    Tone from, to;
    Tone at(double a) const {
        Tone t;
        for (size_t c = 0; c < 3; ++c) {
            t.gain[c] = from.gain[c] + a * (to.gain[c] - from.gain[c]);
            t.shift[c] = from.shift[c] + a * (to.shift[c] - from.shift[c]);
        }
        return t;
    }
};

Rgb posterize(Rgb v) {
    auto q = [](double x) {
        double lv = std::floor(std::clamp(x, 0.0, 0.999999) * 4.0);
        return lv / 4.0 + 0.125;
    };
    return {q(v.r), q(v.g), q(v.b)};
}

struct Morph {
    EditTask task;
    int res = 32;
    Scene src;
    Scene edit;
    std::string instruction;

    int target = -1;           // index of the edited object in src (if any)
    SceneObject added;         // addition / replacement incoming object
    Rgb color_to;              // color alteration
    TextureTag texture_to = TextureTag::kFlat;
    std::string text_to;
    double angle_from = 0, angle_to = 0;
    ToneLerp tone_lerp;
    double noise_from = 0.22, noise_to = 0.05;
    Rgb eye_from{0.08, 0.08, 0.08}, eye_to{0.55, 0.75, 0.95};

    Image render(double alpha) const;
    Mask edit_mask() const;
};

std::vector<RenderObj> base_objs(const Scene& s) {
    std::vector<RenderObj> out;
    out.reserve(s.objects.size());
    for (const auto& o : s.objects) out.push_back(RenderObj{o});
    return out;
}

Image crossfade(const Image& a, const Image& b, const Mask& where, double alpha) {
    Image out = a;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            if (!where.at(y, x)) continue;
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = a.at(y, x, c) + alpha * (b.at(y, x, c) - a.at(y, x, c));
        }
    return out;
}

Image Morph::render(double alpha) const {
    // endpoints reuse the exact endpoint renders so clip anchoring is bit-exact
    switch (task) {
        case EditTask::kSubjectAddition: {
            auto objs = base_objs(src);
            RenderObj ro{added};
            ro.opacity = alpha;
            objs.push_back(ro);
            return render_scene(res, src.background, src.tone, objs);
        }
        case EditTask::kSubjectRemoval: {
            auto objs = base_objs(src);
            objs[static_cast<size_t>(target)].opacity = 1.0 - alpha;
            return render_scene(res, src.background, src.tone, objs);
        }
        case EditTask::kSubjectReplacement:
        case EditTask::kBackgroundChange:
        case EditTask::kTextModification: {
            Image a = render_scene(res, src.background, src.tone, base_objs(src));
            Image b = render_scene(res, edit.background, edit.tone, base_objs(edit));
            return crossfade(a, b, edit_mask(), alpha);
        }
        case EditTask::kColorAlteration: {
            auto objs = base_objs(src);
            auto& ro = objs[static_cast<size_t>(target)];
            ro.obj.color = lerp_rgb(src.objects[static_cast<size_t>(target)].color, color_to, alpha);
            return render_scene(res, src.background, src.tone, objs);
        }
        case EditTask::kMaterialModification: {
            auto objs = base_objs(src);
            auto& ro = objs[static_cast<size_t>(target)];
            ro.texture2 = texture_to;
            ro.tex_mix = alpha;
            return render_scene(res, src.background, src.tone, objs);
        }
        case EditTask::kMotionChange: {
            auto objs = base_objs(src);
            objs[static_cast<size_t>(target)].obj.arm_angle =
                angle_from + alpha * (angle_to - angle_from);
            return render_scene(res, src.background, src.tone, objs);
        }
        case EditTask::kPortraitEditing: {
            auto objs = base_objs(src);
            auto& ro = objs[static_cast<size_t>(target)];
            ro.noise_amp = noise_from + alpha * (noise_to - noise_from);
            ro.eye_color = lerp_rgb(eye_from, eye_to, alpha);
            return render_scene(res, src.background, src.tone, objs);
        }
        case EditTask::kStyleTransfer: {
            Image a = render_scene(res, src.background, src.tone, base_objs(src));
            Image out = a;
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    Rgb v{a.at(y, x, 0), a.at(y, x, 1), a.at(y, x, 2)};
                    Rgb s = posterize(v);
                    out.at(y, x, 0) = v.r + alpha * (s.r - v.r);
                    out.at(y, x, 1) = v.g + alpha * (s.g - v.g);
                    out.at(y, x, 2) = v.b + alpha * (s.b - v.b);
                }
            return out;
        }
        case EditTask::kToneTransformation: {
            return render_scene(res, src.background, tone_lerp.at(alpha), base_objs(src));
        }
    }
    throw GenerationError("unreachable task");
}

Mask Morph::edit_mask() const {
    switch (task) {
        case EditTask::kSubjectAddition:
            return object_region(res, added).dilated();
        case EditTask::kSubjectRemoval:
        case EditTask::kColorAlteration:
        case EditTask::kMaterialModification:
        case EditTask::kPortraitEditing:
            return object_region(res, src.objects[static_cast<size_t>(target)]).dilated();
        case EditTask::kSubjectReplacement:
            return union_masks(object_region(res, src.objects[static_cast<size_t>(target)]),
                               object_region(res, added))
                .dilated();
        case EditTask::kBackgroundChange: {
            // everything except fully covered object interiors
            Mask m = rasterize_region(res, [&](int x, int y) {
                double total = 0;
                for (const auto& o : src.objects) total += coverage(o, x, y);
                return total < 1.0;
            });
            return m.dilated();
        }
        case EditTask::kTextModification: {
            const auto& o = src.objects[static_cast<size_t>(target)];
            Mask m(res, res);
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    int cell = glyph_cell_at(o, x, y);
                    if (cell < 0 || cell >= static_cast<int>(o.text.size())) continue;
                    if (o.text[static_cast<size_t>(cell)] != text_to[static_cast<size_t>(cell)])
                        m.at(y, x) = 1;
                }
            return m.dilated();
        }
        case EditTask::kMotionChange: {
            const auto& o = src.objects[static_cast<size_t>(target)];
            // pad the sweep so the lerped endpoint angle can never round outside it
            double lo = std::min(angle_from, angle_to) - 1e-9;
            double hi = std::max(angle_from, angle_to) + 1e-9;
            Mask m = rasterize_region(res, [&](int x, int y) {
                for (auto [sx, sy] : kSubsamples)
                    if (inside_arm_sweep(o, x + sx, y + sy, lo, hi)) return true;
                return false;
            });
            return m.dilated();
        }
        case EditTask::kStyleTransfer:
        case EditTask::kToneTransformation: {
            Mask m(res, res);
            std::fill(m.px.begin(), m.px.end(), 1);
            return m;
        }
    }
    throw GenerationError("unreachable task");
}

// ---- scene sampling ----

const char* shape_noun(ShapeKind k) {
    switch (k) {
        case ShapeKind::kCircle: return "circle";
        case ShapeKind::kSquare: return "square";
        case ShapeKind::kTriangle: return "triangle";
        case ShapeKind::kStickFigure: return "figure";
        case ShapeKind::kGlyphGrid: return "sign";
    }
    return "object";
}

std::string object_phrase(const SceneObject& o) {
    return std::string(kObjectColors[o.color_name].name) + " " + shape_noun(o.kind);
}

std::string random_glyph_text(Rng& rng, int len) {
    std::string s;
    std::string alpha = kGlyphAlphabet;
    for (int i = 0; i < len; ++i) s += alpha[static_cast<size_t>(rng.uniform_int(0, 15))];
    return s;
}

SceneObject sample_object(Rng& rng, int res, ShapeKind kind, uint64_t noise_seed,
                          bool for_face = false) {
    SceneObject o;
    o.kind = kind;
    o.noise_seed = noise_seed;
    o.color_name = static_cast<int>(rng.uniform_int(0, kNumObjectColors - 1));
    o.color = kObjectColors[o.color_name].rgb;
    int tex = static_cast<int>(rng.uniform_int(0, 2));
    o.texture = static_cast<TextureTag>(tex);
    if (kind == ShapeKind::kGlyphGrid) {
        o.text = random_glyph_text(rng, res >= 64 ? 3 : 2);
        o.texture = TextureTag::kFlat;
        o.size = res >= 64 ? 20 : 11;  // sets glyph scale via glyph_geom
    } else if (kind == ShapeKind::kStickFigure) {
        o.size = rng.uniform(0.28, 0.38) * res;
        o.arm_angle = rng.uniform(-50.0, -10.0) * kPi / 180.0;
        o.texture = TextureTag::kFlat;
    } else if (for_face) {
        o.size = rng.uniform(0.24, 0.32) * res;
        o.texture = TextureTag::kNoisy;
        o.face = true;
    } else {
        o.size = rng.uniform(0.16, 0.26) * res;
    }
    // center-relative extents from a box computed at the origin
    Box b = object_box(o);
    double margin = 2.0;
    o.cx = rng.uniform(margin - b.x0, res - margin - b.x1);
    o.cy = rng.uniform(margin - b.y0, res - margin - b.y1);
    return o;
}

bool descriptor_clash(const std::vector<SceneObject>& objs, const SceneObject& cand) {
    for (const auto& o : objs)
        if (o.color_name == cand.color_name && o.kind == cand.kind) return true;
    return false;
}

bool box_clash(const std::vector<SceneObject>& objs, const SceneObject& cand, double gap) {
    Box cb = object_box(cand);
    for (const auto& o : objs)
        if (object_box(o).intersects(cb, gap)) return true;
    return false;
}

bool inside_canvas(const SceneObject& o, int res) {
    Box b = object_box(o);
    return b.x0 >= 1.0 && b.y0 >= 1.0 && b.x1 <= res - 2.0 && b.y1 <= res - 2.0;
}

constexpr int kMaxAttempts = 1000;

Scene sample_scene_impl(uint64_t seed, int res) {
    Rng rng = Rng::derive(seed, "scene");
    Scene s;

    int bgk = static_cast<int>(rng.uniform_int(0, 2));
    s.background.kind = static_cast<BackgroundKind>(bgk);
    s.background.color_name = static_cast<int>(rng.uniform_int(0, kNumObjectColors - 1));
    Rgb base = kObjectColors[s.background.color_name].rgb;
    s.background.pal0 = scale_rgb(base, 0.40);
    s.background.pal1 = scale_rgb(base, 0.18);
    s.background.horizontal = rng.uniform() < 0.5;
    s.background.cell = rng.uniform() < 0.5 ? 4 : 8;

    for (size_t c = 0; c < 3; ++c) {
        s.tone.gain[c] = rng.uniform(0.93, 0.99);
        s.tone.shift[c] = rng.uniform(0.0, std::min(0.02, 1.0 - s.tone.gain[c]));
    }

    static const std::vector<double> count_w = {0.3, 0.35, 0.25, 0.1};
    int n = 1 + static_cast<int>(rng.categorical(count_w));
    static const std::vector<double> kind_w = {0.29, 0.29, 0.30, 0.06, 0.06};
    int attempts = 0;
    while (static_cast<int>(s.objects.size()) < n) {
        if (++attempts > kMaxAttempts) {
            // a crowded canvas settles for fewer objects; an empty one is an error
            if (!s.objects.empty()) break;
            throw GenerationError("scene sampling exceeded attempt budget");
        }
        auto kind = static_cast<ShapeKind>(rng.categorical(kind_w));
        SceneObject o = sample_object(rng, res, kind, mix64(seed ^ (0xABCDull + attempts)));
        if (!inside_canvas(o, res)) continue;
        if (descriptor_clash(s.objects, o)) continue;
        if (box_clash(s.objects, o, 3.0)) continue;
        s.objects.push_back(o);
    }
    return s;
}

// Task feasibility: deterministically coerce the scene so the requested edit
// has a target (e.g. Motion needs a stick figure). Throws GenerationError
// when the scene cannot host the task; the caller resamples.
void canonicalize_for_task(Scene& s, EditTask task, Rng& rng, int res, uint64_t seed) {
    auto find_kind = [&](ShapeKind k) {
        for (size_t i = 0; i < s.objects.size(); ++i)
            if (s.objects[i].kind == k) return static_cast<int>(i);
        return -1;
    };
    auto convert_first = [&](ShapeKind k, bool for_face) {
        // rebuild object 0 as the required kind at a fresh position
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            SceneObject o =
                sample_object(rng, res, k, mix64(seed ^ (0x515Aull + attempt)), for_face);
            std::vector<SceneObject> others(s.objects.begin() + 1, s.objects.end());
            if (!inside_canvas(o, res)) continue;
            if (descriptor_clash(others, o)) continue;
            if (box_clash(others, o, 3.0)) continue;
            s.objects[0] = o;
            return 0;
        }
        throw GenerationError("could not place required object for task");
    };
    switch (task) {
        case EditTask::kMotionChange:
            if (find_kind(ShapeKind::kStickFigure) < 0) convert_first(ShapeKind::kStickFigure, false);
            break;
        case EditTask::kTextModification:
            if (find_kind(ShapeKind::kGlyphGrid) < 0) convert_first(ShapeKind::kGlyphGrid, false);
            break;
        case EditTask::kPortraitEditing: {
            int idx = -1;
            for (size_t i = 0; i < s.objects.size(); ++i)
                if (s.objects[i].kind == ShapeKind::kCircle && s.objects[i].size >= 0.22 * res)
                    idx = static_cast<int>(i);
            if (idx < 0) idx = convert_first(ShapeKind::kCircle, true);
            auto& face = s.objects[static_cast<size_t>(idx)];
            face.face = true;
            face.texture = TextureTag::kNoisy;
            break;
        }
        default:
            break;
    }
}

std::string place_phrase(double cx, double cy, int res) {
    if (cx < res / 3.0) return "on the left";
    if (cx > 2.0 * res / 3.0) return "on the right";
    if (cy < res / 3.0) return "at the top";
    if (cy > 2.0 * res / 3.0) return "at the bottom";
    return "in the center";
}

const char* material_noun(TextureTag t) {
    switch (t) {
        case TextureTag::kStriped: return "striped fabric";
        case TextureTag::kNoisy: return "rough stone";
        case TextureTag::kFlat: return "smooth plastic";
    }
    return "smooth plastic";
}

Morph build_morph_once(uint64_t scene_seed, EditTask task, int res) {
    Scene s = sample_scene_impl(scene_seed, res);
    Rng canon = Rng::derive(scene_seed, "canon");
    canonicalize_for_task(s, task, canon, res, scene_seed);
    if (task == EditTask::kSubjectAddition && s.objects.size() >= 4)
        throw GenerationError("scene full, no room for addition");

    Rng rng = Rng::derive(scene_seed, std::string("edit/") + kTasks[static_cast<int>(task)].slug);
    Morph m;
    m.task = task;
    m.res = res;
    m.src = s;
    m.edit = s;

    auto pick_basic_target = [&]() {
        std::vector<int> cands;
        for (size_t i = 0; i < s.objects.size(); ++i)
            if (s.objects[i].kind == ShapeKind::kCircle || s.objects[i].kind == ShapeKind::kSquare ||
                s.objects[i].kind == ShapeKind::kTriangle)
                cands.push_back(static_cast<int>(i));
        if (cands.empty()) return -1;
        return cands[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(cands.size()) - 1))];
    };

    switch (task) {
        case EditTask::kSubjectAddition: {
            for (int attempt = 0;; ++attempt) {
                if (attempt >= kMaxAttempts) throw GenerationError("no free space for added object");
                auto kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
                SceneObject o = sample_object(rng, res, kind, mix64(scene_seed ^ (0xADDull + attempt)));
                if (!inside_canvas(o, res)) continue;
                if (descriptor_clash(s.objects, o)) continue;
                if (box_clash(s.objects, o, 3.0)) continue;
                m.added = o;
                break;
            }
            m.edit.objects.push_back(m.added);
            m.instruction = "add a " + object_phrase(m.added) + " " +
                            place_phrase(m.added.cx, m.added.cy, res);
            break;
        }
        case EditTask::kSubjectRemoval: {
            m.target = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(s.objects.size()) - 1));
            m.instruction = "remove the " + object_phrase(s.objects[static_cast<size_t>(m.target)]);
            m.edit.objects.erase(m.edit.objects.begin() + m.target);
            break;
        }
        case EditTask::kSubjectReplacement: {
            m.target = pick_basic_target();
            if (m.target < 0) throw GenerationError("no basic shape to replace");
            const auto& old = s.objects[static_cast<size_t>(m.target)];
            SceneObject repl = old;
            repl.kind = static_cast<ShapeKind>((static_cast<int>(old.kind) +
                                                1 + rng.uniform_int(0, 1)) % 3);
            repl.size = old.size * 0.92;
            repl.color_name = static_cast<int>(rng.uniform_int(0, kNumObjectColors - 1));
            std::vector<SceneObject> others = s.objects;
            others.erase(others.begin() + m.target);
            for (int tries = 0; descriptor_clash(others, repl) && tries < 16; ++tries)
                repl.color_name = static_cast<int>((repl.color_name + 1) % kNumObjectColors);
            repl.color = kObjectColors[repl.color_name].rgb;
            repl.noise_seed = mix64(old.noise_seed ^ 0x5E9Dull);
            m.added = repl;
            m.edit.objects[static_cast<size_t>(m.target)] = repl;
            m.instruction = "replace the " + object_phrase(old) + " with a " + object_phrase(repl);
            break;
        }
        case EditTask::kBackgroundChange: {
            Background nb;
            for (int tries = 0;; ++tries) {
                if (tries >= 64) throw GenerationError("could not sample distinct background");
                nb.kind = static_cast<BackgroundKind>(rng.uniform_int(0, 2));
                nb.color_name = static_cast<int>(rng.uniform_int(0, kNumObjectColors - 1));
                nb.horizontal = rng.uniform() < 0.5;
                nb.cell = rng.uniform() < 0.5 ? 4 : 8;
                if (nb.kind != s.background.kind || nb.color_name != s.background.color_name) break;
            }
            Rgb base = kObjectColors[nb.color_name].rgb;
            nb.pal0 = scale_rgb(base, 0.40);
            nb.pal1 = scale_rgb(base, 0.18);
            m.edit.background = nb;
            const char* kindw = nb.kind == BackgroundKind::kSolid
                                    ? "plain %s backdrop"
                                    : (nb.kind == BackgroundKind::kGradient ? "soft %s gradient"
                                                                            : "%s checker pattern");
            char buf[64];
            std::snprintf(buf, sizeof buf, kindw, kObjectColors[nb.color_name].name);
            m.instruction = std::string("change background to a ") + buf;
            break;
        }
        case EditTask::kColorAlteration: {
            m.target = pick_basic_target();
            if (m.target < 0) throw GenerationError("no basic shape to recolor");
            const auto& old = s.objects[static_cast<size_t>(m.target)];
            int to = old.color_name;
            std::vector<SceneObject> others = s.objects;
            others.erase(others.begin() + m.target);
            for (int tries = 0; tries < 64; ++tries) {
                to = static_cast<int>(rng.uniform_int(0, kNumObjectColors - 1));
                SceneObject probe = old;
                probe.color_name = to;
                if (to != old.color_name && !descriptor_clash(others, probe)) break;
            }
            m.color_to = kObjectColors[to].rgb;
            m.edit.objects[static_cast<size_t>(m.target)].color = m.color_to;
            m.edit.objects[static_cast<size_t>(m.target)].color_name = to;
            m.instruction = "make the " + object_phrase(old) + " " + kObjectColors[to].name;
            break;
        }
        case EditTask::kMaterialModification: {
            m.target = pick_basic_target();
            if (m.target < 0) throw GenerationError("no basic shape to retexture");
            const auto& old = s.objects[static_cast<size_t>(m.target)];
            TextureTag to = old.texture;
            while (to == old.texture)
                to = static_cast<TextureTag>(rng.uniform_int(0, 2));
            m.texture_to = to;
            m.edit.objects[static_cast<size_t>(m.target)].texture = to;
            m.instruction = "turn the " + object_phrase(old) + " into " + material_noun(to);
            break;
        }
        case EditTask::kTextModification: {
            for (size_t i = 0; i < s.objects.size(); ++i)
                if (s.objects[i].kind == ShapeKind::kGlyphGrid) m.target = static_cast<int>(i);
            if (m.target < 0) throw GenerationError("no glyph grid present");
            const auto& old = s.objects[static_cast<size_t>(m.target)];
            std::string to = old.text;
            while (to == old.text) {
                to = old.text;
                int pos = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(to.size()) - 1));
                to[static_cast<size_t>(pos)] = kGlyphAlphabet[static_cast<size_t>(rng.uniform_int(0, 15))];
            }
            m.text_to = to;
            m.edit.objects[static_cast<size_t>(m.target)].text = to;
            m.instruction = "change text to '" + to + "'";
            break;
        }
        case EditTask::kMotionChange: {
            for (size_t i = 0; i < s.objects.size(); ++i)
                if (s.objects[i].kind == ShapeKind::kStickFigure) m.target = static_cast<int>(i);
            if (m.target < 0) throw GenerationError("no stick figure present");
            m.angle_from = s.objects[static_cast<size_t>(m.target)].arm_angle;
            bool raise = m.angle_from < 0.1;
            m.angle_to = raise ? rng.uniform(15.0, 60.0) * kPi / 180.0
                               : rng.uniform(-55.0, -15.0) * kPi / 180.0;
            m.edit.objects[static_cast<size_t>(m.target)].arm_angle = m.angle_to;
            m.instruction = raise ? "raise the figure's arm" : "lower the figure's arm";
            break;
        }
        case EditTask::kPortraitEditing: {
            for (size_t i = 0; i < s.objects.size(); ++i)
                if (s.objects[i].face) m.target = static_cast<int>(i);
            if (m.target < 0) throw GenerationError("no face present");
            m.instruction = "smooth skin and brighten eyes";
            break;
        }
        case EditTask::kStyleTransfer: {
            m.instruction = "convert to watercolor style";
            break;
        }
        case EditTask::kToneTransformation: {
            bool warm = rng.uniform() < 0.5;
            Tone to;
            if (warm) {
                to.gain = {0.97, 0.88, 0.78};
                to.shift = {0.03, 0.01, 0.00};
            } else {
                to.gain = {0.78, 0.88, 0.97};
                to.shift = {0.00, 0.01, 0.03};
            }
            m.tone_lerp = ToneLerp{s.tone, to};
            m.edit.tone = to;
            m.instruction = std::string("apply ") + (warm ? "warm" : "cool") + " cinematic grade";
            break;
        }
    }
    return m;
}

// Edits that cannot be instantiated on the sampled scene resample it from a
// derived seed; generation stays a pure function of (seed, task, resolution).
Morph build_morph(uint64_t seed, EditTask task, int res) {
    for (int resample = 0; resample < 8; ++resample) {
        uint64_t scene_seed = resample == 0 ? seed : mix64(seed ^ (0xED17ull + resample));
        try {
            return build_morph_once(scene_seed, task, res);
        } catch (const GenerationError&) {
            continue;
        }
    }
    throw GenerationError("no valid edit after repeated scene resampling");
}

}  // namespace

// ---- public surface ----

const std::array<EditTask, kNumEditTasks>& all_edit_tasks() {
    static const std::array<EditTask, kNumEditTasks> tasks = [] {
        std::array<EditTask, kNumEditTasks> t{};
        for (int i = 0; i < kNumEditTasks; ++i) t[static_cast<size_t>(i)] = kTasks[i].task;
        return t;
    }();
    return tasks;
}

std::string task_name(EditTask t) { return kTasks[static_cast<int>(t)].name; }
std::string task_slug(EditTask t) { return kTasks[static_cast<int>(t)].slug; }

EditTask task_from_string(const std::string& s) {
    for (const auto& info : kTasks)
        if (s == info.name || s == info.slug) return info.task;
    throw std::invalid_argument("unknown task: " + s);
}

std::string EditTriplet::id() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "s%016llx_%s", static_cast<unsigned long long>(seed),
                  task_slug(task).c_str());
    return buf;
}

TaskDistribution TaskDistribution::paper_mix() {
    TaskDistribution d;
    d.share = {7.6, 9.8, 9.3, 11.1, 7.9, 12.2, 7.2, 9.7, 10.5, 7.5, 8.3};
    d.normalize();
    return d;
}

TaskDistribution TaskDistribution::uniform() {
    TaskDistribution d;
    d.share.fill(1.0);
    d.normalize();
    return d;
}

void TaskDistribution::normalize() {
    double total = 0;
    for (double v : share) {
        if (v < 0) throw std::invalid_argument("task share must be nonnegative");
        total += v;
    }
    if (total <= 0) throw std::invalid_argument("task shares sum to zero");
    for (double& v : share) v /= total;
}

Scene sample_scene(uint64_t seed, int resolution) {
    return sample_scene_impl(seed, resolution);
}

EditTriplet make_triplet(uint64_t seed, EditTask task, int resolution) {
    if (resolution != 32 && resolution != 64)
        throw std::invalid_argument("resolution must be 32 or 64");
    Morph m = build_morph(seed, task, resolution);
    EditTriplet t;
    t.task = task;
    t.seed = seed;
    t.resolution = resolution;
    t.instruction = m.instruction;
    t.scene_src = m.src;
    t.scene_edit = m.edit;
    t.mask = m.edit_mask();
    t.source = m.render(0.0);
    t.edited = m.render(1.0);

    // the edit must stay inside the mask, exactly
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            if (t.mask.at(y, x)) continue;
            for (int c = 0; c < 3; ++c)
                if (t.source.at(y, x, c) != t.edited.at(y, x, c))
                    throw GenerationError("edit leaked outside mask at " + std::to_string(x) + "," +
                                          std::to_string(y));
        }
    return t;
}

EvolutionClip make_evolution_clip(const EditTriplet& triplet, int frames) {
    if (frames < 4 || frames % 4 != 0)
        throw std::invalid_argument("frame count must be >= 4 and divisible by 4");
    Morph m = build_morph(triplet.seed, triplet.task, triplet.resolution);
    EvolutionClip clip;
    clip.frames.frames.resize(static_cast<size_t>(frames));
    clip.alphas.resize(static_cast<size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        double a = static_cast<double>(f) / (frames - 1);
        clip.alphas[static_cast<size_t>(f)] = a;
        if (f == 0)
            clip.frames.frames[0] = triplet.source;
        else if (f == frames - 1)
            clip.frames.frames[static_cast<size_t>(f)] = triplet.edited;
        else
            clip.frames.frames[static_cast<size_t>(f)] = m.render(a);
    }
    return clip;
}

uint64_t triplet_seed(uint64_t stream_seed, uint64_t index, SeedSpace space) {
    uint64_t base = mix64(mix64(stream_seed) ^ mix64(index + 1)) >> 1;
    return space == SeedSpace::kEval ? (base | 0x8000000000000000ull) : base;
}

BalancedSampler::BalancedSampler(TaskDistribution dist, uint64_t seed, int resolution,
                                 SeedSpace space)
    : dist_(dist), stream_seed_(seed), resolution_(resolution), space_(space) {
    dist_.normalize();
    weights_.assign(dist_.share.begin(), dist_.share.end());
    cat_seed_ = mix64(seed ^ fnv1a64("categories"));
}

EditTask BalancedSampler::next_task() {
    Rng r(mix64(cat_seed_ ^ mix64(index_ + 1)));
    ++index_;
    return all_edit_tasks()[r.categorical(weights_)];
}

EditTriplet BalancedSampler::next() {
    uint64_t idx = index_;
    EditTask task = next_task();
    return make_triplet(triplet_seed(stream_seed_, idx, space_), task, resolution_);
}

}  // namespace v4e
