#pragma once

// Little-endian byte buffers shared by the MMF and checkpoint codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmreg::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void magic(std::string_view m) { bytes(m.data(), m.size()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void floats(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }
    void string(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Reader that reports the byte offset of every failure.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string what)
        : data_(data), what_(std::move(what)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    [[noreturn]] void fail(const std::string& message) const {
        throw std::runtime_error(what_ + ": " + message + " at byte offset " + std::to_string(pos_));
    }

    void need(std::size_t n, const char* field) const {
        if (remaining() < n) {
            fail(std::string("truncated ") + field + " (need " + std::to_string(n) + " bytes, have " +
                 std::to_string(remaining()) + ")");
        }
    }

    void magic(std::string_view expected) {
        need(expected.size(), "magic");
        if (std::memcmp(data_.data() + pos_, expected.data(), expected.size()) != 0) {
            fail("bad magic, expected \"" + std::string(expected) + "\"");
        }
        pos_ += expected.size();
    }

    std::uint8_t u8(const char* field) {
        need(1, field);
        return data_[pos_++];
    }
    std::uint32_t u32(const char* field) { return scalar<std::uint32_t>(field); }
    std::uint64_t u64(const char* field) { return scalar<std::uint64_t>(field); }
    double f64(const char* field) { return scalar<double>(field); }

    void floats(std::span<float> out, const char* field) {
        need(out.size_bytes(), field);
        std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    std::string string(const char* field) {
        const auto n = u32(field);
        need(n, field);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void expect_end() const {
        if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
    }

private:
    template <typename T>
    T scalar(const char* field) {
        need(sizeof(T), field);
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mmreg::detail
