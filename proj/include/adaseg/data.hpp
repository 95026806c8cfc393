#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adaseg/grid.hpp"

namespace adaseg {

enum class Split { train, validation, test };

inline constexpr std::array<Split, 3> kAllSplits{Split::train, Split::validation, Split::test};

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// One 2-D slice with K optional structure annotations.
///
/// Availability is derived from mask presence, so `available(k)` is true
/// exactly when `masks[k]` holds a grid.
struct SliceSample {
    std::string patient_id;
    int slice_index = 0;
    Split split = Split::train;
    Image image;
    std::vector<std::optional<Mask>> masks;
    /// Per structure: 1 when the mask was produced by a teacher model.
    std::vector<std::uint8_t> pseudo;

    [[nodiscard]] bool available(std::size_t k) const { return masks.at(k).has_value(); }
    [[nodiscard]] std::vector<std::uint8_t> availability() const;

    friend bool operator==(const SliceSample&, const SliceSample&) = default;
};

struct Dataset {
    std::string name;
    std::vector<std::string> structures;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<SliceSample> samples;

    [[nodiscard]] std::size_t structure_count() const noexcept { return structures.size(); }
    /// Throws std::invalid_argument for unknown names.
    [[nodiscard]] std::size_t structure_index(std::string_view name) const;
    [[nodiscard]] std::optional<std::size_t> find_structure(std::string_view name) const;
    /// Sample indices belonging to `split`, in storage order.
    [[nodiscard]] std::vector<std::size_t> split_indices(Split split) const;
    /// Patient ids of `split` in order of first appearance.
    [[nodiscard]] std::vector<std::string> patients(Split split) const;

    /// Checks every dataset and sample invariant; throws DatasetError.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Synthetic organs

enum class ShapeKind { disk, ellipse, ring, nested };

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape(std::string_view text);

struct StructureSpec {
    std::string name;
    ShapeKind kind = ShapeKind::disk;
};

struct SynthConfig {
    std::string name = "synthetic";
    std::size_t image_size = 64;
    std::array<std::size_t, 3> patients{30, 10, 10};  // train, validation, test
    std::size_t slices_per_patient = 8;
    std::vector<StructureSpec> structures;
    std::vector<double> availability_rate;  // per structure, drawn once per patient
    std::vector<double> per_slice_dropout;  // per structure, applied to available patients
    double noise_std = 0.05;
    std::uint64_t seed = 0;
    /// When set, validation and test splits keep every annotation.
    bool complete_eval_splits = false;

    /// Throws std::invalid_argument on out-of-range fields. Empty per-structure
    /// vectors mean rate 1.0 and no slice dropout.
    void validate() const;
};

/// Structure specs named after their shape kind ("disk,ellipse,ring").
std::vector<StructureSpec> structures_from_kinds(std::string_view csv);

/// Deterministic in `config`; draws per-patient availability before per-slice dropout.
Dataset generate_synthetic(const SynthConfig& config);

// ---------------------------------------------------------------------------
// On-disk format: manifest.json + rasters/

inline constexpr int kManifestVersion = 1;

void write_dataset(const Dataset& dataset, const std::filesystem::path& directory);

/// Accepts either the dataset directory or the manifest file itself.
Dataset load_manifest(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path);

struct AvailabilityCount {
    std::size_t patients = 0;
    std::size_t slices = 0;
};

/// [structure][split] counts of annotated patients and slices.
std::vector<std::array<AvailabilityCount, 3>> availability_table(const Dataset& dataset);
std::string format_availability_table(const Dataset& dataset);

// ---------------------------------------------------------------------------
// CT preprocessing

inline constexpr double kHuFloor = -1000.0;
inline constexpr double kHuScale = 3000.0;

/// Clamps below -1000 HU, then maps v -> (v + 1000) / 3000.
Image preprocess_ct(const Image& hounsfield);

/// Block mean; `factor` must divide both dimensions.
Image downsample(const Image& image, std::size_t factor);
/// Block max, so thin structures survive and the result stays binary.
Mask downsample(const Mask& mask, std::size_t factor);

}  // namespace adaseg
