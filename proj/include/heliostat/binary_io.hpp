#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heliostat/error.hpp"

namespace helio::io {

using Bytes = std::vector<std::uint8_t>;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

/// Little-endian append-only encoder.
class Writer {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
    void zeros(std::size_t n) { bytes_.insert(bytes_.end(), n, 0); }

    const Bytes &bytes() const & { return bytes_; }
    Bytes bytes() && { return std::move(bytes_); }
    std::size_t size() const { return bytes_.size(); }

private:
    template <typename T> void put_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes bytes_;
};

/// Little-endian decoder; every failure reports the byte offset.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    void expect_magic(std::string_view m) {
        need(m.size(), "magic");
        if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0)
            throw FormatError("bad magic, expected \"" + std::string(m) + "\"", pos_);
        pos_ += m.size();
    }
    std::uint8_t u8() {
        need(1, "u8");
        return data_[pos_++];
    }
    std::uint16_t u16() { return get_le<std::uint16_t>("u16"); }
    std::uint32_t u32() { return get_le<std::uint32_t>("u32"); }
    float f32() { return std::bit_cast<float>(get_le<std::uint32_t>("f32")); }
    void skip(std::size_t n) {
        need(n, "padding");
        pos_ += n;
    }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    void expect_end() const {
        if (pos_ != data_.size())
            throw FormatError("trailing bytes", pos_);
    }
    [[noreturn]] void fail(const std::string &what) const { throw FormatError(what, pos_); }

private:
    void need(std::size_t n, const char *what) const {
        if (data_.size() - pos_ < n)
            throw FormatError(std::string("truncated input reading ") + what, pos_);
    }
    template <typename T> T get_le(const char *what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline Bytes read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::io, "cannot open " + path.string());
    Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

inline void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorKind::io, "short write to " + path.string());
}

} // namespace helio::io
