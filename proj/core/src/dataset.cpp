#include "v4e/dataset.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace v4e {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetManifest export_dataset(const std::string& dir, int n, const TaskDistribution& dist,
                               uint64_t seed, int resolution, int clip_frames) {
    if (clip_frames != 0 && (clip_frames < 4 || clip_frames % 4 != 0))
        throw std::invalid_argument("clip_frames must be 0 or a positive multiple of 4");
    fs::create_directories(dir);
    BalancedSampler sampler(dist, seed, resolution, SeedSpace::kTrain);

    DatasetManifest man;
    man.resolution = resolution;
    man.stream_seed = seed;
    man.clip_frames = clip_frames;

    for (int i = 0; i < n; ++i) {
        EditTriplet t = sampler.next();
        char sub[32];
        std::snprintf(sub, sizeof sub, "%06d", i);
        fs::path tdir = fs::path(dir) / sub;
        fs::create_directories(tdir);

        DatasetRecord rec;
        rec.id = t.id();
        rec.task = t.task;
        rec.instruction = t.instruction;
        rec.seed = t.seed;
        rec.src_path = (fs::path(sub) / "src.png").string();
        rec.edit_path = (fs::path(sub) / "edit.png").string();
        rec.mask_path = (fs::path(sub) / "mask.png").string();
        write_png((tdir / "src.png").string(), t.source);
        write_png((tdir / "edit.png").string(), t.edited);
        write_png((tdir / "mask.png").string(), t.mask);

        if (clip_frames > 0) {
            EvolutionClip clip = make_evolution_clip(t, clip_frames);
            for (int f = 0; f < clip_frames; ++f) {
                char fname[16];
                std::snprintf(fname, sizeof fname, "f%03d.png", f);
                write_png((tdir / fname).string(), clip.frames.frames[static_cast<size_t>(f)]);
                rec.clip_paths.push_back((fs::path(sub) / fname).string());
            }
        }
        man.records.push_back(std::move(rec));
    }

    json j;
    j["schema"] = "v4e-dataset/1";
    j["resolution"] = man.resolution;
    j["stream_seed"] = man.stream_seed;
    j["clip_frames"] = man.clip_frames;
    j["records"] = json::array();
    for (const auto& r : man.records) {
        json rj;
        rj["id"] = r.id;
        rj["task"] = task_name(r.task);
        rj["instruction"] = r.instruction;
        rj["seed"] = r.seed;
        rj["files"] = {{"src", r.src_path}, {"edit", r.edit_path}, {"mask", r.mask_path}};
        if (!r.clip_paths.empty()) rj["files"]["clip"] = r.clip_paths;
        j["records"].push_back(std::move(rj));
    }
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest in " + dir);
    os << j.dump(2) << "\n";
    return man;
}

DatasetManifest load_manifest(const std::string& dir) {
    fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream is(mpath);
    if (!is) throw std::runtime_error("missing manifest: " + mpath.string());
    json j = json::parse(is);
    if (j.value("schema", "") != "v4e-dataset/1")
        throw std::runtime_error("unexpected dataset schema in " + mpath.string());
    DatasetManifest man;
    man.resolution = j.at("resolution").get<int>();
    man.stream_seed = j.at("stream_seed").get<uint64_t>();
    man.clip_frames = j.value("clip_frames", 0);
    for (const auto& rj : j.at("records")) {
        DatasetRecord r;
        r.id = rj.at("id").get<std::string>();
        r.task = task_from_string(rj.at("task").get<std::string>());
        r.instruction = rj.at("instruction").get<std::string>();
        r.seed = rj.at("seed").get<uint64_t>();
        r.src_path = rj.at("files").at("src").get<std::string>();
        r.edit_path = rj.at("files").at("edit").get<std::string>();
        r.mask_path = rj.at("files").at("mask").get<std::string>();
        if (rj.at("files").contains("clip"))
            r.clip_paths = rj.at("files").at("clip").get<std::vector<std::string>>();
        man.records.push_back(std::move(r));
    }
    return man;
}

EditTriplet regenerate(const DatasetRecord& rec, int resolution) {
    EditTriplet t = make_triplet(rec.seed, rec.task, resolution);
    if (t.instruction != rec.instruction)
        throw std::runtime_error("regenerated instruction mismatch for record " + rec.id +
                                 " (dataset was produced by an incompatible generator version)");
    return t;
}

}  // namespace v4e
