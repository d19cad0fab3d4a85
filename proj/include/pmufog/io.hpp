#pragma once

// File helpers: atomic writes, waveform/label/detection serialization.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmufog/errors.hpp"
#include "pmufog/knn.hpp"
#include "pmufog/signalgen.hpp"
#include "pmufog/ssa.hpp"

namespace pmufog::io {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Writes to a sibling temporary file and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string fixed(double v, int digits = 9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string record_csv(const signalgen::WaveformRecord& rec) {
    std::string out = "t,v\n";
    for (std::size_t i = 0; i < rec.size(); ++i) {
        out += fixed(rec.timestamps[i]);
        out += ',';
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", rec.voltages[i]);
        out += buf;
        out += '\n';
    }
    return out;
}

inline nlohmann::json labels_json(const signalgen::WaveformRecord& rec) {
    nlohmann::json j;
    j["fault"] = std::string(signalgen::to_string(rec.fault));
    j["sample_rate_hz"] = rec.config.sample_rate_hz;
    j["duration_s"] = rec.config.duration_s;
    j["noise_level"] = rec.config.noise_level;
    j["severity"] = rec.config.severity;
    j["seed"] = rec.config.rng_seed;
    j["intervals"] = nlohmann::json::array();
    for (const auto& l : rec.labels) {
        j["intervals"].push_back({{"start_s", l.start_s}, {"end_s", l.end_s}, {"type", signalgen::to_string(l.type)}});
    }
    return j;
}

inline void apply_labels(signalgen::WaveformRecord& rec, const nlohmann::json& j) {
    rec.fault = signalgen::parse_fault(j.at("fault").get<std::string>());
    rec.config.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    rec.config.duration_s = j.value("duration_s", static_cast<double>(rec.size()) / rec.config.sample_rate_hz);
    rec.config.noise_level = j.value("noise_level", 0.0);
    rec.config.severity = j.value("severity", 1.0);
    rec.config.rng_seed = j.value("seed", std::uint64_t{0});
    rec.labels.clear();
    for (const auto& iv : j.at("intervals")) {
        rec.labels.push_back({iv.at("start_s").get<double>(), iv.at("end_s").get<double>(),
                              signalgen::parse_fault(iv.at("type").get<std::string>())});
    }
}

inline signalgen::WaveformRecord parse_record_csv(const std::string& text, const std::string& name) {
    signalgen::WaveformRecord rec;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    if (line != "t,v") throw IoError(name + ": expected header t,v");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw IoError(name + ": malformed row");
        rec.timestamps.push_back(std::stod(line.substr(0, comma)));
        rec.voltages.push_back(std::stod(line.substr(comma + 1)));
    }
    if (rec.timestamps.size() >= 2) {
        // Timestamps are written with 9 decimals; integer rates are recovered exactly.
        const double span = rec.timestamps.back() - rec.timestamps.front();
        rec.config.sample_rate_hz = std::round(static_cast<double>(rec.size() - 1) / span);
        rec.config.duration_s = static_cast<double>(rec.size()) / rec.config.sample_rate_hz;
    }
    return rec;
}

/// Reads a record written by record_csv plus its label document.
inline signalgen::WaveformRecord load_record(const std::filesystem::path& csv, const std::filesystem::path& labels) {
    auto rec = parse_record_csv(read_file(csv), csv.string());
    apply_labels(rec, nlohmann::json::parse(read_file(labels)));
    return rec;
}

inline nlohmann::json record_json(const signalgen::WaveformRecord& rec) {
    nlohmann::json j = labels_json(rec);
    j["t"] = rec.timestamps;
    j["v"] = rec.voltages;
    return j;
}

inline signalgen::WaveformRecord record_from_json(const nlohmann::json& j) {
    signalgen::WaveformRecord rec;
    rec.timestamps = j.at("t").get<std::vector<double>>();
    rec.voltages = j.at("v").get<std::vector<double>>();
    if (rec.timestamps.size() != rec.voltages.size()) throw IoError("record: t and v differ in length");
    apply_labels(rec, j);
    return rec;
}

enum class Format { Csv, Json };

inline Format parse_format(std::string_view s) {
    if (s == "csv") return Format::Csv;
    if (s == "json") return Format::Json;
    throw ConfigError("unknown format: " + std::string(s));
}

/// One file per record under records/, plus an index.json listing files and labels.
inline std::vector<std::filesystem::path> write_dataset(const std::filesystem::path& dir,
                                                        std::span<const signalgen::WaveformRecord> records,
                                                        Format format) {
    std::vector<std::filesystem::path> files;
    nlohmann::json index;
    index["format"] = format == Format::Csv ? "csv" : "json";
    index["records"] = nlohmann::json::array();
    for (std::size_t i = 0; i < records.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "records/%04zu_%s.%s", i, std::string(signalgen::to_string(records[i].fault)).c_str(),
                      format == Format::Csv ? "csv" : "json");
        if (format == Format::Csv) {
            write_atomic(dir / name, record_csv(records[i]));
        } else {
            write_atomic(dir / name, record_json(records[i]).dump() + "\n");
        }
        nlohmann::json entry = labels_json(records[i]);
        entry["file"] = name;
        index["records"].push_back(entry);
        files.push_back(dir / name);
    }
    write_atomic(dir / "index.json", index.dump(2) + "\n");
    return files;
}

inline std::vector<signalgen::WaveformRecord> load_dataset(const std::filesystem::path& dir) {
    const auto index_path = dir / "index.json";
    if (!std::filesystem::exists(index_path)) throw DatasetError("dataset: " + index_path.string() + " not found");
    const auto index = nlohmann::json::parse(read_file(index_path));
    std::vector<signalgen::WaveformRecord> out;
    for (const auto& entry : index.at("records")) {
        const auto path = dir / entry.at("file").get<std::string>();
        if (path.extension() == ".json") {
            out.push_back(record_from_json(nlohmann::json::parse(read_file(path))));
        } else {
            auto rec = parse_record_csv(read_file(path), path.string());
            apply_labels(rec, entry);
            out.push_back(std::move(rec));
        }
    }
    if (out.empty()) throw DatasetError("dataset: " + dir.string() + " contains no records");
    return out;
}

inline std::string detection_csv(const ssa::DetectionSeries& s) {
    std::string out = "t,distance,flag\n";
    for (const auto& p : s.points) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.9f,%.17g,%d\n", p.time_s, p.distance, p.is_anomaly ? 1 : 0);
        out += buf;
    }
    return out;
}

/// Array of row objects keyed by the header. Numeric cells become numbers, empty cells null.
inline nlohmann::json csv_to_json(const std::string& csv) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    nlohmann::json rows = nlohmann::json::array();
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) return rows;
    const auto header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t i = 0; i < header.size(); ++i) {
            const std::string cell = i < cells.size() ? cells[i] : "";
            double v = 0.0;
            const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty()) {
                row[header[i]] = nullptr;
            } else if (ec == std::errc{} && end == cell.data() + cell.size()) {
                row[header[i]] = v;
            } else {
                row[header[i]] = cell;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

/// Writes <stem>.csv or <stem>.json.
inline void write_table(const std::filesystem::path& dir, const std::string& stem, const std::string& csv,
                        Format format) {
    if (format == Format::Csv) {
        write_atomic(dir / (stem + ".csv"), csv);
    } else {
        write_atomic(dir / (stem + ".json"), csv_to_json(csv).dump(2) + "\n");
    }
}

inline constexpr int kModelVersion = 1;

inline nlohmann::json model_json(const knn::KnnModel& m) {
    nlohmann::json j;
    j["version"] = kModelVersion;
    j["k"] = m.config.k;
    j["window_len"] = m.config.window_len;
    j["selected_features"] = m.config.selected_features;
    j["standardize"] = m.config.standardize;
    j["renyi_alpha"] = m.config.renyi_alpha;
    j["mean"] = m.mean;
    j["scale"] = m.scale;
    j["points"] = m.points;
    j["labels"] = nlohmann::json::array();
    for (const auto l : m.labels) j["labels"].push_back(static_cast<int>(l));
    return j;
}

inline knn::KnnModel model_from_json(const nlohmann::json& j) {
    const int version = j.value("version", 0);
    if (version != kModelVersion) throw IoError("knn model: unsupported version " + std::to_string(version));
    knn::KnnModel m;
    m.config.k = j.at("k").get<int>();
    m.config.window_len = j.at("window_len").get<std::size_t>();
    m.config.selected_features = j.at("selected_features").get<std::vector<int>>();
    m.config.standardize = j.at("standardize").get<bool>();
    m.config.renyi_alpha = j.at("renyi_alpha").get<double>();
    knn::validate(m.config);
    m.mean = j.at("mean").get<std::vector<double>>();
    m.scale = j.at("scale").get<std::vector<double>>();
    m.points = j.at("points").get<std::vector<std::vector<double>>>();
    for (const auto& l : j.at("labels")) m.labels.push_back(l.get<int>() == 0 ? knn::Label::Normal : knn::Label::Fault);
    const std::size_t dim = m.config.selected_features.size();
    if (m.labels.size() != m.points.size() || m.mean.size() != dim || m.scale.size() != dim) {
        throw IoError("knn model: inconsistent sizes");
    }
    for (const auto& p : m.points) {
        if (p.size() != dim) throw IoError("knn model: point dimension mismatch");
    }
    return m;
}

}  // namespace pmufog::io
