#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adaseg/data.hpp"
#include "adaseg/raster.hpp"

namespace adaseg {

using nlohmann::ordered_json;

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view text)
{
    if (text == "train") return Split::train;
    if (text == "validation") return Split::validation;
    if (text == "test") return Split::test;
    throw std::invalid_argument("unknown split '" + std::string(text) + "'");
}

std::vector<std::uint8_t> SliceSample::availability() const
{
    std::vector<std::uint8_t> w(masks.size());
    for (std::size_t k = 0; k < masks.size(); ++k) w[k] = masks[k].has_value() ? 1 : 0;
    return w;
}

std::optional<std::size_t> Dataset::find_structure(std::string_view name) const
{
    for (std::size_t k = 0; k < structures.size(); ++k) {
        if (structures[k] == name) return k;
    }
    return std::nullopt;
}

std::size_t Dataset::structure_index(std::string_view name) const
{
    if (auto k = find_structure(name)) return *k;
    throw std::invalid_argument("dataset '" + this->name + "' has no structure '" + std::string(name) + "'");
}

std::vector<std::size_t> Dataset::split_indices(Split split) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == split) out.push_back(i);
    }
    return out;
}

std::vector<std::string> Dataset::patients(Split split) const
{
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& s : samples) {
        if (s.split == split && seen.insert(s.patient_id).second) out.push_back(s.patient_id);
    }
    return out;
}

void Dataset::validate() const
{
    if (structures.empty()) throw DatasetError("dataset has no structures");
    std::set<std::string> names(structures.begin(), structures.end());
    if (names.size() != structures.size()) throw DatasetError("duplicate structure names");

    std::map<std::string, Split> patient_split;
    std::set<std::pair<std::string, int>> keys;
    for (const auto& s : samples) {
        const std::string where = s.patient_id + "/" + std::to_string(s.slice_index);
        if (s.slice_index < 0) throw DatasetError(where + ": negative slice index");
        if (!keys.emplace(s.patient_id, s.slice_index).second) {
            throw DatasetError("duplicate (patient_id, slice_index) " + where);
        }
        auto [it, inserted] = patient_split.emplace(s.patient_id, s.split);
        if (!inserted && it->second != s.split) {
            throw DatasetError("patient " + s.patient_id + " appears in more than one split");
        }
        if (!s.image.same_shape(rows, cols)) throw DatasetError(where + ": image dimension mismatch");
        if (s.masks.size() != structures.size()) {
            throw DatasetError(where + ": availability vector length differs from structure count");
        }
        if (!s.pseudo.empty() && s.pseudo.size() != structures.size()) {
            throw DatasetError(where + ": pseudo flag vector length differs from structure count");
        }
        for (std::size_t k = 0; k < s.masks.size(); ++k) {
            if (!s.masks[k]) {
                if (!s.pseudo.empty() && s.pseudo[k]) throw DatasetError(where + ": pseudo flag on missing mask");
                continue;
            }
            if (!s.masks[k]->same_shape(rows, cols)) throw DatasetError(where + ": mask dimension mismatch");
            for (auto v : s.masks[k]->values()) {
                if (v > 1) throw DatasetError(where + ": mask value outside {0,1}");
            }
        }
    }
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path)
{
    if (std::filesystem::is_directory(dataset_path)) return dataset_path / "manifest.json";
    return dataset_path;
}

namespace {

std::string raster_stem(const SliceSample& s)
{
    std::ostringstream os;
    os << s.patient_id << "_s";
    os.width(3);
    os.fill('0');
    os << s.slice_index;
    return os.str();
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& directory)
{
    dataset.validate();
    std::error_code ec;
    std::filesystem::create_directories(directory / "rasters", ec);
    if (ec) throw std::runtime_error("cannot create dataset directory " + directory.string() + ": " + ec.message());

    ordered_json manifest;
    manifest["version"] = kManifestVersion;
    manifest["name"] = dataset.name;
    manifest["structures"] = dataset.structures;
    manifest["image_size"] = {dataset.rows, dataset.cols};
    auto& samples = manifest["samples"] = ordered_json::array();

    for (const auto& s : dataset.samples) {
        const auto stem = raster_stem(s);
        const std::string image_rel = "rasters/" + stem + "_image.f32";
        raster::write_f32(directory / image_rel, s.image.values());

        ordered_json entry;
        entry["patient_id"] = s.patient_id;
        entry["slice_index"] = s.slice_index;
        entry["split"] = std::string(to_string(s.split));
        entry["image"] = image_rel;
        auto& masks = entry["masks"] = ordered_json::array();
        bool any_pseudo = false;
        for (std::size_t k = 0; k < s.masks.size(); ++k) {
            if (!s.masks[k]) {
                masks.push_back(nullptr);
                continue;
            }
            const std::string rel = "rasters/" + stem + "_m" + std::to_string(k) + ".u8";
            raster::write_u8(directory / rel, s.masks[k]->values());
            masks.push_back(rel);
            any_pseudo = any_pseudo || (!s.pseudo.empty() && s.pseudo[k]);
        }
        if (any_pseudo) {
            auto& flags = entry["pseudo"] = ordered_json::array();
            for (auto f : s.pseudo) flags.push_back(f != 0);
        }
        samples.push_back(std::move(entry));
    }
    raster::write_text(directory / "manifest.json", manifest.dump(1) + "\n");
}

namespace {

[[noreturn]] void schema_error(const std::string& what)
{
    throw DatasetError("manifest schema violation: " + what);
}

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) schema_error(where + " is missing '" + key + "'");
    return obj.at(key);
}

template <class T>
std::vector<T> read_raster(const std::filesystem::path& path, std::size_t count, const std::string& where)
{
    try {
        if constexpr (std::is_same_v<T, float>) {
            return raster::read_f32(path, count);
        } else {
            return raster::read_u8(path, count);
        }
    } catch (const std::runtime_error& e) {
        throw DatasetError(where + ": " + e.what());
    }
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& path)
{
    const auto file = manifest_path(path);
    std::ifstream in(file);
    if (!in) throw DatasetError("cannot open manifest " + file.string());
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DatasetError("manifest is not valid JSON: " + std::string(e.what()));
    }
    const auto root = file.parent_path();

    const auto& version = require(manifest, "version", "manifest");
    if (!version.is_number_integer() || version.get<int>() != kManifestVersion) {
        schema_error("unsupported version " + version.dump());
    }

    Dataset ds;
    ds.name = manifest.contains("name") && manifest["name"].is_string() ? manifest["name"].get<std::string>()
                                                                         : root.filename().string();
    const auto& structures = require(manifest, "structures", "manifest");
    if (!structures.is_array() || structures.empty()) schema_error("'structures' must be a non-empty array");
    for (const auto& s : structures) {
        if (!s.is_string()) schema_error("structure names must be strings");
        ds.structures.push_back(s.get<std::string>());
    }
    const auto& size = require(manifest, "image_size", "manifest");
    if (!size.is_array() || size.size() != 2 || !size[0].is_number_unsigned() || !size[1].is_number_unsigned() ||
        size[0].get<std::size_t>() == 0 || size[1].get<std::size_t>() == 0) {
        schema_error("'image_size' must be [H, W] with positive integers");
    }
    ds.rows = size[0].get<std::size_t>();
    ds.cols = size[1].get<std::size_t>();
    const std::size_t pixels = ds.rows * ds.cols;
    const std::size_t K = ds.structures.size();

    const auto& samples = require(manifest, "samples", "manifest");
    if (!samples.is_array()) schema_error("'samples' must be an array");
    ds.samples.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& e = samples[i];
        const std::string where = "samples[" + std::to_string(i) + "]";
        SliceSample s;
        const auto& pid = require(e, "patient_id", where);
        if (!pid.is_string()) schema_error(where + ".patient_id must be a string");
        s.patient_id = pid.get<std::string>();
        const auto& idx = require(e, "slice_index", where);
        if (!idx.is_number_unsigned()) schema_error(where + ".slice_index must be a non-negative integer");
        s.slice_index = idx.get<int>();
        const auto& split = require(e, "split", where);
        if (!split.is_string()) schema_error(where + ".split must be a string");
        try {
            s.split = parse_split(split.get<std::string>());
        } catch (const std::invalid_argument& err) {
            schema_error(where + ": " + err.what());
        }
        const auto& image = require(e, "image", where);
        if (!image.is_string()) schema_error(where + ".image must be a path string");
        s.image = Image(ds.rows, ds.cols, read_raster<float>(root / image.get<std::string>(), pixels, where));

        const auto& masks = require(e, "masks", where);
        if (!masks.is_array() || masks.size() != K) {
            schema_error(where + ".masks must be an array of length " + std::to_string(K));
        }
        s.masks.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            if (masks[k].is_null()) continue;
            if (!masks[k].is_string()) schema_error(where + ".masks entries must be a path or null");
            auto values = read_raster<std::uint8_t>(root / masks[k].get<std::string>(), pixels, where);
            s.masks[k] = Mask(ds.rows, ds.cols, std::move(values));
        }
        if (e.contains("pseudo")) {
            const auto& flags = e["pseudo"];
            if (!flags.is_array() || flags.size() != K) schema_error(where + ".pseudo must be a bool array of length K");
            s.pseudo.resize(K);
            for (std::size_t k = 0; k < K; ++k) {
                if (!flags[k].is_boolean()) schema_error(where + ".pseudo entries must be booleans");
                s.pseudo[k] = flags[k].get<bool>() ? 1 : 0;
            }
        }
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

std::vector<std::array<AvailabilityCount, 3>> availability_table(const Dataset& dataset)
{
    std::vector<std::array<AvailabilityCount, 3>> table(dataset.structure_count());
    std::vector<std::array<std::set<std::string>, 3>> patients(dataset.structure_count());
    for (const auto& s : dataset.samples) {
        const auto split = static_cast<std::size_t>(s.split);
        for (std::size_t k = 0; k < s.masks.size(); ++k) {
            if (!s.masks[k]) continue;
            ++table[k][split].slices;
            patients[k][split].insert(s.patient_id);
        }
    }
    for (std::size_t k = 0; k < table.size(); ++k) {
        for (std::size_t j = 0; j < 3; ++j) table[k][j].patients = patients[k][j].size();
    }
    return table;
}

std::string format_availability_table(const Dataset& dataset)
{
    const auto table = availability_table(dataset);
    std::size_t width = 9;
    for (const auto& n : dataset.structures) width = std::max(width, n.size());

    std::ostringstream os;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    os << pad("Structure", width) << "  " << pad("Train", 16) << pad("Validation", 16) << "Test\n";
    os << pad("", width) << "  " << pad("# Patients", 16) << pad("# Patients", 16) << "# Patients\n";
    os << pad("", width) << "  " << pad("(# Slices)", 16) << pad("(# Slices)", 16) << "(# Slices)\n";
    std::array<std::size_t, 3> slice_totals{};
    for (std::size_t k = 0; k < table.size(); ++k) {
        os << pad(dataset.structures[k], width) << "  ";
        for (std::size_t j = 0; j < 3; ++j) {
            const auto cell = std::to_string(table[k][j].patients) + " (" + std::to_string(table[k][j].slices) + ")";
            os << (j < 2 ? pad(cell, 16) : cell);
        }
        os << "\n";
    }
    os << pad("Total", width) << "  ";
    for (std::size_t j = 0; j < 3; ++j) {
        const auto split = kAllSplits[j];
        slice_totals[j] = dataset.split_indices(split).size();
        const auto cell = std::to_string(dataset.patients(split).size()) + " (" + std::to_string(slice_totals[j]) + ")";
        os << (j < 2 ? pad(cell, 16) : cell);
    }
    os << "\n";
    return os.str();
}

}  // namespace adaseg
