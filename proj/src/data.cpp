#include "gradova/data.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gradova/rng.hpp"

namespace gradova::data {

namespace {

// Class centroid directions from the layout seed. While the dimension
// allows, Gram-Schmidt keeps them mutually orthogonal (and orthogonal to any
// supplied frame), so "separation" sets the pairwise centroid distance
// (separation*sqrt(2)) and not just the radius.
std::vector<Vector> blob_directions(uint64_t seed, int class_count, int dim,
                                    const std::vector<Vector>* against = nullptr) {
    Rng rng(seed);
    std::vector<Vector> dirs;
    const size_t fixed = against ? against->size() : 0;
    for (int c = 0; c < class_count; ++c) {
        Vector v(dim);
        double norm = 0.0;
        do {
            for (auto& e : v) e = rng.normal();
            if (static_cast<size_t>(c) + fixed < static_cast<size_t>(dim)) {
                auto project_out = [&](const Vector& prev) {
                    double dot = 0.0;
                    for (int k = 0; k < dim; ++k) dot += v[k] * prev[k];
                    for (int k = 0; k < dim; ++k) v[k] -= dot * prev[k];
                };
                if (against)
                    for (const auto& prev : *against) project_out(prev);
                for (const auto& prev : dirs) project_out(prev);
            }
            norm = 0.0;
            for (double e : v) norm += e * e;
            norm = std::sqrt(norm);
        } while (norm < 1e-9);
        for (auto& e : v) e /= norm;
        dirs.push_back(std::move(v));
    }
    return dirs;
}

std::vector<Vector> resolve_directions(const SourceSpec& spec) {
    if (spec.direction_similarity <= 0.0)
        return blob_directions(spec.seed, spec.class_count, spec.dim);
    if (!(spec.direction_similarity <= 1.0))
        throw std::invalid_argument("generate: direction_similarity must be in (0,1]");
    if (spec.dim < 2 * spec.class_count)
        throw std::invalid_argument("generate: similar layout needs dim >= 2*class_count");
    const auto base = blob_directions(spec.base_layout_seed, spec.class_count, spec.dim);
    const auto novel = blob_directions(spec.seed, spec.class_count, spec.dim, &base);
    const double s = spec.direction_similarity;
    const double t = std::sqrt(1.0 - s * s);
    std::vector<Vector> dirs(spec.class_count, Vector(spec.dim, 0.0));
    for (int c = 0; c < spec.class_count; ++c)
        for (int k = 0; k < spec.dim; ++k) dirs[c][k] = s * base[c][k] + t * novel[c][k];
    return dirs;
}

std::vector<TaggedSample> generate_blobs(const SourceSpec& spec, OodTag tag) {
    const auto dirs = resolve_directions(spec);
    Rng noise(derive_seed(spec.seed, 100 + spec.draw));
    std::vector<TaggedSample> out;
    out.reserve(static_cast<size_t>(spec.class_count) * spec.samples_per_class);
    for (int c = 0; c < spec.class_count; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s) {
            TaggedSample t;
            t.features.resize(spec.dim);
            for (int k = 0; k < spec.dim; ++k)
                t.features[k] = spec.separation * dirs[c][k] + noise.normal();
            t.tag = tag;
            if (tag == OodTag::idd) t.class_label = c;
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<TaggedSample> generate_rings(const SourceSpec& spec, OodTag tag) {
    if (spec.dim < 2) throw std::invalid_argument("rings need dim >= 2");
    Rng noise(derive_seed(spec.seed, 100 + spec.draw));
    std::vector<TaggedSample> out;
    for (int c = 0; c < spec.class_count; ++c) {
        const double radius = spec.separation * static_cast<double>(c + 1);
        for (int s = 0; s < spec.samples_per_class; ++s) {
            TaggedSample t;
            t.features.assign(spec.dim, 0.0);
            const double theta = noise.uniform(0.0, 2.0 * M_PI);
            const double r = radius + noise.normal();
            t.features[0] = r * std::cos(theta);
            t.features[1] = r * std::sin(theta);
            for (int k = 2; k < spec.dim; ++k) t.features[k] = noise.normal();
            t.tag = tag;
            if (tag == OodTag::idd) t.class_label = c;
            out.push_back(std::move(t));
        }
    }
    return out;
}

uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("truncated idx header: " + path);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace

std::vector<TaggedSample> generate(const SourceSpec& spec, OodTag tag) {
    if (spec.class_count < 1 || spec.dim < 1 || spec.samples_per_class < 1 ||
        spec.separation < 0.0)
        throw std::invalid_argument("generate: invalid spec");
    if (spec.kind == "blobs") return generate_blobs(spec, tag);
    if (spec.kind == "rings") return generate_rings(spec, tag);
    throw std::invalid_argument("generate: unknown kind '" + spec.kind + "'");
}

std::vector<TaggedSample> load_source(const SourceSpec& spec, OodTag tag) {
    if (spec.kind == "blobs" || spec.kind == "rings") return generate(spec, tag);
    std::vector<TaggedSample> out;
    if (spec.kind == "idx_file") {
        out = spec.labels_path.empty() ? read_idx(spec.path)
                                       : read_idx(spec.path, spec.labels_path);
    } else if (spec.kind == "csv_file") {
        out = read_csv(spec.path, spec.has_label);
    } else {
        throw std::invalid_argument("load_source: unknown kind '" + spec.kind + "'");
    }
    for (auto& s : out) {
        s.tag = tag;
        if (tag == OodTag::ood) s.class_label.reset();
    }
    return out;
}

std::vector<TaggedSample> read_idx(const std::string& images_path) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + images_path);
    const uint32_t magic = read_be_u32(in, images_path);
    if (magic != 0x00000803u)
        throw std::runtime_error("bad idx image magic in " + images_path);
    const uint32_t count = read_be_u32(in, images_path);
    const uint32_t rows = read_be_u32(in, images_path);
    const uint32_t cols = read_be_u32(in, images_path);
    const size_t pixels = static_cast<size_t>(rows) * cols;

    std::vector<TaggedSample> out;
    out.reserve(count);
    std::vector<unsigned char> buf(pixels);
    for (uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!in) throw std::runtime_error("truncated idx image file: " + images_path);
        TaggedSample t;
        t.features.resize(pixels);
        for (size_t k = 0; k < pixels; ++k)
            t.features[k] = static_cast<double>(buf[k]) / 255.0;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<TaggedSample> read_idx(const std::string& images_path,
                                   const std::string& labels_path) {
    auto samples = read_idx(images_path);
    std::ifstream in(labels_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + labels_path);
    const uint32_t magic = read_be_u32(in, labels_path);
    if (magic != 0x00000801u)
        throw std::runtime_error("bad idx label magic in " + labels_path);
    const uint32_t count = read_be_u32(in, labels_path);
    if (count != samples.size())
        throw std::runtime_error("idx label/image count mismatch");
    for (auto& s : samples) {
        char b;
        in.read(&b, 1);
        if (!in) throw std::runtime_error("truncated idx label file: " + labels_path);
        s.class_label = static_cast<int>(static_cast<unsigned char>(b));
    }
    return samples;
}

std::vector<TaggedSample> read_csv(const std::string& path, bool has_label) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<TaggedSample> out;
    std::string line;
    size_t width = 0;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<double> cells;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string cell = line.substr(pos, comma - pos);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw std::runtime_error("non-numeric cell '" + cell + "' at line " +
                                         std::to_string(lineno) + " of " + path);
            cells.push_back(v);
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw std::runtime_error("ragged row at line " + std::to_string(lineno) + " of " +
                                     path);
        TaggedSample t;
        if (has_label) {
            if (cells.size() < 2) throw std::runtime_error("labeled csv needs >= 2 columns");
            const double lab = cells.back();
            cells.pop_back();
            if (lab != std::floor(lab))
                throw std::runtime_error("non-integer label at line " + std::to_string(lineno));
            t.class_label = static_cast<int>(lab);
        }
        t.features = std::move(cells);
        out.push_back(std::move(t));
    }
    return out;
}

void write_csv(const std::vector<TaggedSample>& samples, const std::string& path,
               bool with_label) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[64];
    for (const auto& s : samples) {
        for (size_t k = 0; k < s.features.size(); ++k) {
            const auto res = std::to_chars(buf, buf + sizeof(buf), s.features[k]);
            out.write(buf, res.ptr - buf);
            if (k + 1 < s.features.size() || with_label) out.put(',');
        }
        if (with_label) {
            if (!s.class_label)
                throw std::runtime_error("write_csv: sample is missing a label");
            out << *s.class_label;
        }
        out.put('\n');
    }
}

}  // namespace gradova::data
