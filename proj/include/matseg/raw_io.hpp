// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace matseg {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Raw little-endian sidecar files. Readers throw IoError when the file is
// missing and FormatError when its byte length does not match `count`.
void write_f32_le(const fs::path& path, std::span<const float> values);
std::vector<float> read_f32_le(const fs::path& path, std::size_t count);
void write_u8(const fs::path& path, std::span<const std::uint8_t> values);
std::vector<std::uint8_t> read_u8(const fs::path& path, std::size_t count);
void write_u32_le(const fs::path& path, std::span<const std::uint32_t> values);
std::vector<std::uint32_t> read_u32_le(const fs::path& path, std::size_t count);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// float32 little-endian bytes, base64 encoded.
std::string encode_f32_base64(std::span<const double> values);
std::vector<double> decode_f32_base64(std::string_view text, std::size_t count);

json read_json_file(const fs::path& path);
void write_json_file(const fs::path& path, const json& doc);

}  // namespace matseg
