#ifndef V4E_DATASET_HPP
#define V4E_DATASET_HPP

#include <string>
#include <vector>

#include "v4e/synthworld.hpp"

namespace v4e {

// On-disk dataset: `manifest.json` plus one directory per triplet holding
// src.png / edit.png / mask.png and optional clip frames f000.png...
// Training regenerates triplets from (seed, task, resolution); the PNGs are
// a faithful 8-bit export for inspection and interop.
struct DatasetRecord {
    std::string id;
    EditTask task = EditTask::kSubjectAddition;
    std::string instruction;
    uint64_t seed = 0;
    std::string src_path;
    std::string edit_path;
    std::string mask_path;
    std::vector<std::string> clip_paths;
};

struct DatasetManifest {
    int resolution = 32;
    uint64_t stream_seed = 0;
    int clip_frames = 0;  // 0 when clips were not exported
    std::vector<DatasetRecord> records;
};

// Samples n triplets at the given distribution and writes the directory.
DatasetManifest export_dataset(const std::string& dir, int n, const TaskDistribution& dist,
                               uint64_t seed, int resolution, int clip_frames = 0);

DatasetManifest load_manifest(const std::string& dir);

// Pure regeneration of the triplet named by a record.
EditTriplet regenerate(const DatasetRecord& rec, int resolution);

}  // namespace v4e

#endif
