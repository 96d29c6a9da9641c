#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

// Reader for the IDX byte layout used by the MNIST distribution files:
// a big-endian header (two zero bytes, a type code, a dimension count,
// then one 32-bit size per dimension) followed by raw element data.

namespace focal {

struct IdxImages {
    std::uint32_t count;
    std::uint32_t rows;
    std::uint32_t cols;
    std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major

    const std::uint8_t* image(std::size_t i) const { return pixels.data() + i * rows * cols; }
};

struct IdxLabels {
    std::uint32_t count;
    std::vector<std::uint8_t> labels;
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw std::runtime_error("idx: truncated header in " + path);
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

inline std::vector<std::uint32_t> read_idx_header(std::istream& in, const std::string& path,
                                                  std::uint32_t expected_magic) {
    std::uint32_t magic = read_be32(in, path);
    if (magic != expected_magic) {
        throw std::runtime_error("idx: bad magic in " + path + " (got " + std::to_string(magic) +
                                 ", want " + std::to_string(expected_magic) + ")");
    }
    std::vector<std::uint32_t> dims(magic & 0xff);
    for (auto& d : dims) d = read_be32(in, path);
    return dims;
}

}  // namespace detail

/// Image file: magic 2051, dimensions (count, rows, cols), unsigned bytes.
inline IdxImages read_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    auto dims = detail::read_idx_header(in, path, 2051);
    IdxImages out{};
    out.count = dims[0];
    out.rows = dims[1];
    out.cols = dims[2];
    std::size_t total = std::size_t(out.count) * out.rows * out.cols;
    out.pixels.resize(total);
    if (!in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(total))) {
        throw std::runtime_error("idx: truncated pixel data in " + path);
    }
    return out;
}

/// Label file: magic 2049, dimension (count), unsigned bytes.
inline IdxLabels read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    auto dims = detail::read_idx_header(in, path, 2049);
    IdxLabels out{};
    out.count = dims[0];
    out.labels.resize(out.count);
    if (!in.read(reinterpret_cast<char*>(out.labels.data()), static_cast<std::streamsize>(out.count))) {
        throw std::runtime_error("idx: truncated label data in " + path);
    }
    return out;
}

}  // namespace focal
