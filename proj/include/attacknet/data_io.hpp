#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attacknet/tensor.hpp"

namespace attacknet {

enum class Label : int { Bonafide = 0, Attack = 1 };

enum class Split : int { Train = 0, Val = 1, Test = 2 };

struct ImageRecord {
    Tensor pixels;  // [3,H,W], values in [0,1], R,G,B channel order
    std::size_t height = 0;
    std::size_t width = 0;
};

struct Sample {
    std::string path;
    Label label = Label::Bonafide;
    std::string source;  // originating dataset tag, preserved through fusion
    Split split = Split::Train;
};

struct DatasetManifest {
    std::string name;
    std::vector<Sample> samples;

    std::vector<const Sample*> in_split(Split s) const;
    std::size_t count(Split s) const;
};

/// Decode a binary PPM (P6, maxval 255). Pixels scaled to [0,1] by /255.
ImageRecord decode_image(const std::string& path);
ImageRecord decode_image_bytes(const std::vector<std::uint8_t>& bytes, const std::string& what);

/// Encode to canonical P6 bytes: "P6\n<w> <h>\n255\n" + RGB payload.
std::vector<std::uint8_t> encode_ppm(const Tensor& pixels);
void write_ppm(const Tensor& pixels, const std::string& path);

/// Bilinear resize with half-pixel center alignment; output stays in [0,1].
ImageRecord resize_bilinear(const ImageRecord& img, std::size_t out_h, std::size_t out_w);

/// Enumerate <root>/bonafide/*.ppm and <root>/attack/*.ppm in sorted-path
/// order. Split assignments come from <root>/split.csv when present,
/// otherwise from a seeded stratified shuffle at the given train ratio.
DatasetManifest load_dataset(const std::string& root, const std::string& name,
                             double train_ratio = 0.48, std::uint64_t seed = 0);

/// Concatenate >= 2 manifests, preserving source tags and splits; the
/// combined train-split order is shuffled with the given seed.
DatasetManifest fuse(const std::vector<DatasetManifest>& datasets, std::uint64_t seed);

}  // namespace attacknet
