#pragma once

// Little-endian byte packing and whole-file IO shared by the binary formats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "mmgr/errors.hpp"

namespace mmgr::io {

inline void put_uint(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u8(std::string& out, std::uint8_t v) { put_uint(out, v, 1); }
inline void put_u32(std::string& out, std::uint32_t v) { put_uint(out, v, 4); }
inline void put_u64(std::string& out, std::uint64_t v) { put_uint(out, v, 8); }
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    Reader(std::string_view bytes, std::size_t offset = 0) : m_bytes(bytes), m_pos(offset) {}

    std::uint64_t uint(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(m_bytes[m_pos + i])) << (8 * i);
        m_pos += static_cast<std::size_t>(bytes);
        return v;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string string() {
        const std::size_t n = u32();
        need(n);
        std::string s(m_bytes.substr(m_pos, n));
        m_pos += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = m_bytes.substr(m_pos, n);
        m_pos += n;
        return s;
    }

    std::size_t position() const noexcept { return m_pos; }
    std::size_t remaining() const noexcept { return m_bytes.size() - m_pos; }

private:
    void need(std::size_t n) const {
        if (m_pos + n > m_bytes.size()) throw FormatError("unexpected end of data");
    }

    std::string_view m_bytes;
    std::size_t m_pos;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace mmgr::io
