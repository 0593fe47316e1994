// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the matseg Project.

#include "matseg/grids.hpp"

#include "matseg/error.hpp"
#include "matseg/raw_io.hpp"

namespace matseg {

std::string_view to_string(EncodingMode mode) noexcept {
    switch (mode) {
        case EncodingMode::mssa: return "mssa";
        case EncodingMode::msma: return "msma";
        case EncodingMode::rr: return "rr";
    }
    return "unknown";
}

EncodingMode parse_encoding_mode(std::string_view text) {
    if (text == "mssa") return EncodingMode::mssa;
    if (text == "msma") return EncodingMode::msma;
    if (text == "rr") return EncodingMode::rr;
    throw FormatError("unknown encoding mode '" + std::string(text) + "' (expected mssa, msma or rr)");
}

namespace {

fs::path data_path(const fs::path& header) {
    fs::path p = header;
    p.replace_extension(".f32");
    return p;
}

void prepare(const fs::path& header) {
    if (header.has_parent_path()) fs::create_directories(header.parent_path());
}

}  // namespace

void save_features(const FeatureGrid& grid, const fs::path& header) {
    if (grid.values.size() != grid.pixel_count() * grid.feature_len) {
        throw ValidationError("feature grid size does not match width*height*feature_len");
    }
    prepare(header);
    const fs::path data = data_path(header);
    write_f32_le(data, grid.values);
    write_json_file(header, {{"width", grid.width},
                             {"height", grid.height},
                             {"feature_len", grid.feature_len},
                             {"mode", std::string(to_string(grid.mode))},
                             {"data_file", data.filename().string()}});
}

FeatureGrid load_features(const fs::path& header) {
    const json doc = read_json_file(header);
    FeatureGrid grid;
    std::string data;
    try {
        grid.width = doc.at("width").get<int>();
        grid.height = doc.at("height").get<int>();
        grid.feature_len = doc.at("feature_len").get<std::size_t>();
        grid.mode = parse_encoding_mode(doc.at("mode").get<std::string>());
        data = doc.value("data_file", data_path(header).filename().string());
    } catch (const json::exception& e) {
        throw FormatError(header.string() + ": malformed feature header: " + e.what());
    }
    if (grid.width < 1 || grid.height < 1 || grid.feature_len < 1) {
        throw FormatError(header.string() + ": bad feature grid dimensions");
    }
    grid.values = read_f32_le(header.parent_path() / data, grid.pixel_count() * grid.feature_len);
    return grid;
}

void save_prediction(const ProbabilityGrid& grid, const fs::path& header) {
    if (grid.probs.size() != grid.pixel_count() * grid.classes) {
        throw ValidationError("prediction grid size does not match width*height*classes");
    }
    prepare(header);
    const fs::path data = data_path(header);
    write_f32_le(data, grid.probs);
    write_json_file(header, {{"width", grid.width},
                             {"height", grid.height},
                             {"classes", grid.classes},
                             {"source", grid.source},
                             {"palette", grid.palette},
                             {"data_file", data.filename().string()}});
}

ProbabilityGrid load_prediction(const fs::path& header) {
    const json doc = read_json_file(header);
    ProbabilityGrid grid;
    std::string data;
    try {
        grid.width = doc.at("width").get<int>();
        grid.height = doc.at("height").get<int>();
        grid.classes = doc.at("classes").get<std::size_t>();
        grid.source = doc.value("source", std::string{});
        grid.palette = doc.value("palette", std::vector<std::string>{});
        data = doc.value("data_file", data_path(header).filename().string());
    } catch (const json::exception& e) {
        throw FormatError(header.string() + ": malformed prediction header: " + e.what());
    }
    if (grid.width < 1 || grid.height < 1 || grid.classes < 1) {
        throw FormatError(header.string() + ": bad prediction grid dimensions");
    }
    if (!grid.palette.empty() && grid.palette.size() != grid.classes) {
        throw FormatError(header.string() + ": palette size does not match classes");
    }
    grid.probs = read_f32_le(header.parent_path() / data, grid.pixel_count() * grid.classes);
    return grid;
}

}  // namespace matseg
