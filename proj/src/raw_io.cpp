// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/raw_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <omp.h>

#include "matseg/error.hpp"
#include "matseg/parallel.hpp"

namespace matseg {

int resolve_threads(int requested) noexcept {
    return requested > 0 ? requested : omp_get_max_threads();
}

namespace {

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::little) {
        return value;
    } else {
        std::array<unsigned char, sizeof(T)> bytes;
        std::memcpy(bytes.data(), &value, sizeof(T));
        std::reverse(bytes.begin(), bytes.end());
        std::memcpy(&value, bytes.data(), sizeof(T));
        return value;
    }
}

std::vector<char> read_all(const fs::path& path, std::size_t expected_bytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected_bytes) {
        throw FormatError(path.string() + ": expected " + std::to_string(expected_bytes) +
                          " bytes, found " + std::to_string(size));
    }
    in.seekg(0);
    std::vector<char> buf(size);
    if (size > 0 && !in.read(buf.data(), static_cast<std::streamsize>(size))) {
        throw IoError("short read from " + path.string());
    }
    return buf;
}

void write_all(const fs::path& path, const void* data, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
void write_le(const fs::path& path, std::span<const T> values) {
    std::vector<T> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) buf[i] = to_little(values[i]);
    write_all(path, buf.data(), buf.size() * sizeof(T));
}

template <typename T>
std::vector<T> read_le(const fs::path& path, std::size_t count) {
    const auto raw = read_all(path, count * sizeof(T));
    std::vector<T> out(count);
    if (count > 0) std::memcpy(out.data(), raw.data(), raw.size());
    for (auto& v : out) v = to_little(v);
    return out;
}

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

void write_f32_le(const fs::path& path, std::span<const float> values) { write_le(path, values); }
std::vector<float> read_f32_le(const fs::path& path, std::size_t count) {
    return read_le<float>(path, count);
}
void write_u8(const fs::path& path, std::span<const std::uint8_t> values) {
    write_all(path, values.data(), values.size());
}
std::vector<std::uint8_t> read_u8(const fs::path& path, std::size_t count) {
    return read_le<std::uint8_t>(path, count);
}
void write_u32_le(const fs::path& path, std::span<const std::uint32_t> values) {
    write_le(path, values);
}
std::vector<std::uint32_t> read_u32_le(const fs::path& path, std::size_t count) {
    return read_le<std::uint32_t>(path, count);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw FormatError("misplaced base64 padding");
                vals[j] = 0;
                ++pad;
            } else {
                if (pad > 0) throw FormatError("misplaced base64 padding");
                vals[j] = decode_char(c);
                if (vals[j] < 0) throw FormatError("invalid base64 character");
            }
        }
        const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
    return out;
}

std::string encode_f32_base64(std::span<const double> values) {
    std::vector<std::uint8_t> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = to_little(static_cast<float>(values[i]));
        std::memcpy(bytes.data() + 4 * i, &f, 4);
    }
    return base64_encode(bytes);
}

std::vector<double> decode_f32_base64(std::string_view text, std::size_t count) {
    const auto bytes = base64_decode(text);
    if (bytes.size() != count * 4) {
        throw FormatError("base64 tensor holds " + std::to_string(bytes.size() / 4) +
                          " floats, expected " + std::to_string(count));
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        out[i] = to_little(f);
    }
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace matseg
