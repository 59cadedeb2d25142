#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gradova/linalg.hpp"

namespace gradova::data {

using linalg::Vector;

enum class OodTag { idd, ood };

struct TaggedSample {
    Vector features;
    std::optional<int> class_label;  // present for labeled in-distribution data
    OodTag tag = OodTag::idd;
};

// One synthetic source (or file) description. A full dataset pairs an
// in-distribution source with an outlier source.
struct SourceSpec {
    std::string kind = "blobs";  // blobs | rings | idx_file | csv_file
    int class_count = 4;
    int dim = 8;
    int samples_per_class = 100;
    // Centroid distance from the origin in units of the per-class std (1).
    double separation = 6.0;
    // Layout seed: pins the class geometry (centroid directions).
    uint64_t seed = 1;
    // Independent draw index: same layout, fresh noise. Train/test/stream
    // splits of one dataset share the seed and differ in draw.
    uint64_t draw = 0;
    // Hard-case outliers resembling specific classes: when similarity > 0,
    // direction c becomes similarity * (base-layout direction c) plus an
    // orthogonal novelty component drawn from this spec's own seed. Needs
    // dim >= 2 * class_count.
    double direction_similarity = 0.0;
    uint64_t base_layout_seed = 0;
    // File kinds use these instead of the generator fields.
    std::string path;
    std::string labels_path;  // idx_file only, optional
    bool has_label = true;    // csv_file only
};

struct DatasetSpec {
    SourceSpec idd;
    SourceSpec ood;
};

// Deterministic for a given spec. Blobs place class c at separation times a
// seeded random unit direction with unit isotropic noise; while dim allows,
// the directions are orthogonalized (a random orthonormal frame) so the
// pairwise centroid distance is separation*sqrt(2). Rings place class c on a
// circle of radius separation*(c+1) in the first two coordinates with unit
// radial noise, remaining coordinates pure noise.
std::vector<TaggedSample> generate(const SourceSpec& spec, OodTag tag);

// Loads any source kind, generating or reading files as the spec says.
std::vector<TaggedSample> load_source(const SourceSpec& spec, OodTag tag);

// IDX (MNIST-style) readers: big-endian header, magic 0x00000803 for images
// and 0x00000801 for labels; pixels scaled to [0,1], images row-major.
std::vector<TaggedSample> read_idx(const std::string& images_path);
std::vector<TaggedSample> read_idx(const std::string& images_path,
                                   const std::string& labels_path);

// Rectangular numeric CSV, optional integer label in the last column.
std::vector<TaggedSample> read_csv(const std::string& path, bool has_label);
void write_csv(const std::vector<TaggedSample>& samples, const std::string& path,
               bool with_label);

}  // namespace gradova::data
