#include "attacknet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "attacknet/errors.hpp"
#include "attacknet/prng.hpp"

namespace fs = std::filesystem;

namespace attacknet {

std::vector<const Sample*> DatasetManifest::in_split(Split s) const {
    std::vector<const Sample*> out;
    for (const auto& smp : samples)
        if (smp.split == s) out.push_back(&smp);
    return out;
}

std::size_t DatasetManifest::count(Split s) const {
    std::size_t n = 0;
    for (const auto& smp : samples)
        if (smp.split == s) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// PPM P6
// ---------------------------------------------------------------------------

namespace {

// Reads one whitespace-delimited token, skipping '#' comments to end of line.
std::string next_token(const std::vector<std::uint8_t>& b, std::size_t& pos,
                       const std::string& what) {
    while (pos < b.size()) {
        const char c = static_cast<char>(b[pos]);
        if (c == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < b.size()) {
        const char c = static_cast<char>(b[pos]);
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++pos;
    }
    if (tok.empty()) throw IoError(what + ": truncated PPM header");
    return tok;
}

std::size_t parse_dim(const std::string& tok, const std::string& what) {
    std::size_t v = 0;
    for (char c : tok) {
        if (c < '0' || c > '9') throw IoError(what + ": malformed PPM header field '" + tok + "'");
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    if (v == 0) throw IoError(what + ": PPM dimension must be positive");
    return v;
}

}  // namespace

ImageRecord decode_image_bytes(const std::vector<std::uint8_t>& bytes, const std::string& what) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        std::string magic = bytes.size() >= 2
                                ? std::string(1, static_cast<char>(bytes[0])) +
                                      static_cast<char>(bytes[1])
                                : "<empty>";
        throw IoError(what + ": unsupported image format (magic '" + magic + "', want P6)");
    }
    std::size_t pos = 2;
    const std::size_t w = parse_dim(next_token(bytes, pos, what), what);
    const std::size_t h = parse_dim(next_token(bytes, pos, what), what);
    const std::size_t maxval = parse_dim(next_token(bytes, pos, what), what);
    if (maxval != 255) {
        throw IoError(what + ": PPM maxval must be 255, got " + std::to_string(maxval));
    }
    if (pos >= bytes.size()) throw IoError(what + ": truncated PPM payload");
    ++pos;  // single whitespace after maxval

    const std::size_t need = 3 * h * w;
    if (bytes.size() - pos < need) throw IoError(what + ": truncated PPM payload");

    ImageRecord rec;
    rec.height = h;
    rec.width = w;
    rec.pixels = Tensor({3, h, w});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t off = pos + 3 * (i * w + j);
            for (std::size_t c = 0; c < 3; ++c) {
                rec.pixels[(c * h + i) * w + j] = static_cast<float>(bytes[off + c]) / 255.0f;
            }
        }
    }
    return rec;
}

ImageRecord decode_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    return decode_image_bytes(bytes, path);
}

std::vector<std::uint8_t> encode_ppm(const Tensor& pixels) {
    if (pixels.rank() != 3 || pixels.dim(0) != 3) {
        throw ShapeError("encode_ppm: expected [3,H,W] tensor, got " + shape_str(pixels));
    }
    const std::size_t h = pixels.dim(1), w = pixels.dim(2);
    std::ostringstream header;
    header << "P6\n" << w << " " << h << "\n255\n";
    const std::string hs = header.str();

    std::vector<std::uint8_t> out(hs.begin(), hs.end());
    out.reserve(out.size() + 3 * h * w);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            for (std::size_t c = 0; c < 3; ++c) {
                const float v = std::clamp(pixels[(c * h + i) * w + j], 0.0f, 1.0f);
                out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
            }
        }
    }
    return out;
}

void write_ppm(const Tensor& pixels, const std::string& path) {
    const auto bytes = encode_ppm(pixels);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Resize
// ---------------------------------------------------------------------------

ImageRecord resize_bilinear(const ImageRecord& img, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output extents must be >= 1");
    const std::size_t h = img.height, w = img.width;
    ImageRecord out;
    out.height = out_h;
    out.width = out_w;
    out.pixels = Tensor({3, out_h, out_w});

    const float sy = static_cast<float>(h) / static_cast<float>(out_h);
    const float sx = static_cast<float>(w) / static_cast<float>(out_w);
    for (std::size_t i = 0; i < out_h; ++i) {
        const float src_y = (static_cast<float>(i) + 0.5f) * sy - 0.5f;
        const float yc = std::clamp(src_y, 0.0f, static_cast<float>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(yc);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const float fy = yc - static_cast<float>(y0);
        for (std::size_t j = 0; j < out_w; ++j) {
            const float src_x = (static_cast<float>(j) + 0.5f) * sx - 0.5f;
            const float xc = std::clamp(src_x, 0.0f, static_cast<float>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(xc);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const float fx = xc - static_cast<float>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const float* p = img.pixels.data() + c * h * w;
                const float v = (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
                                fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
                out.pixels[(c * out_h + i) * out_w + j] = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> list_images(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
            out.push_back(entry.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Split parse_split(const std::string& s, const std::string& where) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw IoError(where + ": split must be train|val|test, got '" + s + "'");
}

}  // namespace

DatasetManifest load_dataset(const std::string& root, const std::string& name, double train_ratio,
                             std::uint64_t seed) {
    const fs::path rp(root);
    const fs::path bona = rp / "bonafide";
    const fs::path attack = rp / "attack";
    if (!fs::is_directory(bona)) throw IoError("dataset missing bonafide/ directory: " + root);
    if (!fs::is_directory(attack)) throw IoError("dataset missing attack/ directory: " + root);

    const auto bona_paths = list_images(bona);
    const auto attack_paths = list_images(attack);
    if (bona_paths.empty()) throw IoError("dataset has no bonafide images: " + root);
    if (attack_paths.empty()) throw IoError("dataset has no attack images: " + root);

    DatasetManifest mf;
    mf.name = name;
    for (const auto& p : bona_paths) mf.samples.push_back({p, Label::Bonafide, name, Split::Train});
    for (const auto& p : attack_paths) mf.samples.push_back({p, Label::Attack, name, Split::Train});

    const fs::path split_csv = rp / "split.csv";
    if (fs::is_regular_file(split_csv)) {
        std::ifstream is(split_csv);
        std::string line;
        if (!std::getline(is, line)) throw IoError("empty split.csv in " + root);
        std::map<std::string, Split> by_name;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw IoError("malformed split.csv row: " + line);
            std::string fn = line.substr(0, comma);
            std::string sp = line.substr(comma + 1);
            if (!sp.empty() && sp.back() == '\r') sp.pop_back();
            by_name[fn] = parse_split(sp, "split.csv");
        }
        for (auto& smp : mf.samples) {
            // Keyed by path relative to the dataset root ("bonafide/x.ppm");
            // bare filenames would be ambiguous across the two class dirs.
            const fs::path sp(smp.path);
            const std::string fn =
                sp.parent_path().filename().string() + "/" + sp.filename().string();
            auto it = by_name.find(fn);
            if (it == by_name.end()) throw IoError("split.csv has no entry for " + fn);
            smp.split = it->second;
        }
    } else {
        // Seeded stratified split: per class, shuffle sample indices and take
        // round(ratio * n) for training.
        Prng p(seed ^ 0x5eedULL);
        for (Label lab : {Label::Bonafide, Label::Attack}) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < mf.samples.size(); ++i)
                if (mf.samples[i].label == lab) idx.push_back(i);
            for (std::size_t i = idx.size(); i-- > 1;) {
                std::swap(idx[i], idx[p.next_index(i + 1)]);
            }
            const std::size_t n_train =
                static_cast<std::size_t>(std::lround(train_ratio * static_cast<double>(idx.size())));
            for (std::size_t k = 0; k < idx.size(); ++k) {
                mf.samples[idx[k]].split = k < n_train ? Split::Train : Split::Val;
            }
        }
    }
    return mf;
}

DatasetManifest fuse(const std::vector<DatasetManifest>& datasets, std::uint64_t seed) {
    if (datasets.size() < 2) throw ConfigError("fuse: needs at least 2 datasets");
    DatasetManifest out;
    std::set<std::string> seen;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        if (d) out.name += "+";
        out.name += datasets[d].name;
        for (const auto& smp : datasets[d].samples) {
            if (!seen.insert(smp.path).second) {
                throw IoError("fuse: duplicate sample path " + smp.path);
            }
            out.samples.push_back(smp);
        }
    }
    // Shuffle only the relative order of train samples; other splits keep
    // concatenation order.
    std::vector<std::size_t> train_pos;
    for (std::size_t i = 0; i < out.samples.size(); ++i)
        if (out.samples[i].split == Split::Train) train_pos.push_back(i);
    std::vector<Sample> train_samples;
    for (std::size_t i : train_pos) train_samples.push_back(out.samples[i]);
    Prng p(seed ^ 0xF05EDULL);
    for (std::size_t i = train_samples.size(); i-- > 1;) {
        std::swap(train_samples[i], train_samples[p.next_index(i + 1)]);
    }
    for (std::size_t k = 0; k < train_pos.size(); ++k) out.samples[train_pos[k]] = train_samples[k];
    return out;
}

}  // namespace attacknet
