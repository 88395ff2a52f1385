// dataio.hpp
//
// IDX dataset files, dataset cache/fetch, model archives and tabular export.

#ifndef TTFS_DATAIO_HPP
#define TTFS_DATAIO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttfs/network.hpp"

namespace ttfs {

enum class DataErrc {
    bad_magic,
    truncated,
    trailing_data,
    dimension_overflow,
    size_mismatch,
    decompression,
    download,
    io,
    unknown_version,
    shape,
    parse,
};

const char* to_string(DataErrc code);

class DataError : public std::runtime_error {
public:
    DataError(DataErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    DataErrc code() const { return code_; }

private:
    DataErrc code_;
};

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

struct IdxTensor {
    std::uint32_t magic = 0;
    std::vector<std::size_t> dims;
    std::vector<std::uint8_t> data;
};

/// Parses an unsigned-byte IDX container (1-d labels or 3-d images).
/// Total over arbitrary input: returns a tensor or throws DataError.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

enum class Split { train, test };

struct Dataset {
    std::string name;
    Split split = Split::train;
    std::size_t rows = 28;
    std::size_t cols = 28;
    std::vector<std::uint8_t> images;  // count x rows x cols
    std::vector<std::uint8_t> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t pixels_per_sample() const { return rows * cols; }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return {images.data() + i * pixels_per_sample(), pixels_per_sample()};
    }
    /// Samples [begin, begin + count), clipped to the dataset size.
    Dataset slice(std::size_t begin, std::size_t count) const;
};

Dataset make_dataset(IdxTensor images, IdxTensor labels, std::string name, Split split);

/// x = byte / 255.
std::vector<double> normalize_pixels(std::span<const std::uint8_t> raw);
void normalize_pixels(std::span<const std::uint8_t> raw, std::span<double> out);

/// Raw bytes of a (possibly gzip-compressed) file. Gzip is detected by magic.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Fetches a URL. file:// URLs are served from disk.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::vector<std::uint8_t> get(const std::string& url) = 0;
};

std::unique_ptr<Transport> make_default_transport();

/// File names of the four IDX archives for a split.
struct IdxFileNames {
    std::string images;
    std::string labels;
};
IdxFileNames idx_file_names(Split split);

/// Downloads any missing gzipped IDX files from mirror_url into
/// cache_dir/name, then parses the requested split. Cached files are never
/// re-downloaded; writes go through a per-file lock and an atomic rename.
Dataset fetch_dataset(const std::string& name, Split split, const std::string& mirror_url,
                      const std::filesystem::path& cache_dir, Transport& transport);

/// Loads a split from a directory already holding the IDX files.
Dataset load_dataset(const std::filesystem::path& dir, const std::string& name, Split split);

/// Default mirror for a dataset name ("mnist" or "fashion-mnist").
std::string default_mirror(const std::string& name);

inline constexpr int kArchiveFormatVersion = 1;

struct ModelArchive {
    int format_version = kArchiveFormatVersion;
    NetworkModel model;
    std::map<std::string, std::string> provenance;
};

std::string serialize_archive(const ModelArchive& archive);
ModelArchive deserialize_archive(const std::string& text);
void save_model(const std::filesystem::path& path, const ModelArchive& archive);
ModelArchive load_model(const std::filesystem::path& path);

/// Column-oriented text table written as CSV or as a JSON list of objects
/// with the same field names. meta lines become "# key=value" CSV comments
/// and a "meta" object in JSON.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> meta;

    void add_row(std::vector<std::string> row);
};

std::string format_number(double value);
std::string format_number(std::int64_t value);
std::string format_number(std::size_t value);

std::string to_csv(const Table& table);
std::string to_json(const Table& table);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

struct SimulationResult;

/// Membrane samples: layer, neuron, time_ms, potential.
Table trace_table(const SimulationResult& result);
/// Spike events: layer, neuron, time_ms, tick (-1 in continuous mode).
Table spike_table(const SimulationResult& result);

}  // namespace ttfs

#endif  // TTFS_DATAIO_HPP
