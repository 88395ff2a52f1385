// dataio.cpp

#include "ttfs/dataio.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <zlib.h>

#include <atomic>
#include <charconv>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ttfs/simulator.hpp"

namespace ttfs {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(DataErrc code) {
    switch (code) {
        case DataErrc::bad_magic: return "bad magic";
        case DataErrc::truncated: return "truncated";
        case DataErrc::trailing_data: return "trailing data";
        case DataErrc::dimension_overflow: return "dimension overflow";
        case DataErrc::size_mismatch: return "size mismatch";
        case DataErrc::decompression: return "decompression";
        case DataErrc::download: return "download";
        case DataErrc::io: return "io";
        case DataErrc::unknown_version: return "unknown version";
        case DataErrc::shape: return "shape";
        case DataErrc::parse: return "parse";
    }
    return "unknown";
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw DataError(DataErrc::truncated, "IDX header truncated");
    const std::uint32_t magic = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                                (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
    if (magic != kIdxLabelMagic && magic != kIdxImageMagic) {
        std::ostringstream os;
        os << "bad IDX magic 0x" << std::hex << magic;
        throw DataError(DataErrc::bad_magic, os.str());
    }
    const std::size_t ndims = bytes[3];
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header) throw DataError(DataErrc::truncated, "IDX dimensions truncated");

    IdxTensor t;
    t.magic = magic;
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        const std::uint8_t* p = bytes.data() + 4 + 4 * d;
        const std::size_t dim = (std::size_t{p[0]} << 24) | (std::size_t{p[1]} << 16) |
                                (std::size_t{p[2]} << 8) | std::size_t{p[3]};
        if (dim != 0 && total > std::numeric_limits<std::size_t>::max() / dim)
            throw DataError(DataErrc::dimension_overflow, "IDX dimensions overflow");
        total *= dim;
        t.dims.push_back(dim);
    }
    const std::size_t payload = bytes.size() - header;
    if (payload < total) {
        throw DataError(DataErrc::truncated, "IDX payload truncated: expected " +
                                                 std::to_string(total) + " bytes, got " +
                                                 std::to_string(payload));
    }
    if (payload > total)
        throw DataError(DataErrc::trailing_data, "IDX payload has trailing bytes");
    t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return t;
}

Dataset Dataset::slice(std::size_t begin, std::size_t count) const {
    Dataset d;
    d.name = name;
    d.split = split;
    d.rows = rows;
    d.cols = cols;
    begin = std::min(begin, size());
    const std::size_t end = std::min(size(), begin + count);
    const std::size_t px = pixels_per_sample();
    d.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin * px),
                    images.begin() + static_cast<std::ptrdiff_t>(end * px));
    d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
    return d;
}

Dataset make_dataset(IdxTensor images, IdxTensor labels, std::string name, Split split) {
    if (images.magic != kIdxImageMagic || images.dims.size() != 3)
        throw DataError(DataErrc::bad_magic, "expected a 3-d image tensor");
    if (labels.magic != kIdxLabelMagic || labels.dims.size() != 1)
        throw DataError(DataErrc::bad_magic, "expected a 1-d label vector");
    if (images.dims[0] != labels.dims[0])
        throw DataError(DataErrc::size_mismatch, "image count " + std::to_string(images.dims[0]) +
                                                     " differs from label count " +
                                                     std::to_string(labels.dims[0]));
    for (std::uint8_t l : labels.data)
        if (l >= 10) throw DataError(DataErrc::parse, "label out of range");
    Dataset d;
    d.name = std::move(name);
    d.split = split;
    d.rows = images.dims[1];
    d.cols = images.dims[2];
    d.images = std::move(images.data);
    d.labels = std::move(labels.data);
    return d;
}

std::vector<double> normalize_pixels(std::span<const std::uint8_t> raw) {
    std::vector<double> out(raw.size());
    normalize_pixels(raw, out);
    return out;
}

void normalize_pixels(std::span<const std::uint8_t> raw, std::span<double> out) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<double>(raw[i]) / 255.0;
}

namespace {

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> in, const std::string& label) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw DataError(DataErrc::decompression, "zlib init failed for " + label);
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> chunk(1 << 16);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataError(DataErrc::decompression, "corrupt gzip data in " + label);
        }
        out.insert(out.end(), chunk.begin(), chunk.begin() + (chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw DataError(DataErrc::decompression, "truncated gzip data in " + label);
        }
    }
    inflateEnd(&zs);
    return out;
}

bool is_gzip(std::span<const std::uint8_t> b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrc::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string temp_suffix() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    return ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++) + "." +
           std::to_string(rd());
}

class FileLock {
public:
    explicit FileLock(const fs::path& path) {
        fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ < 0) throw DataError(DataErrc::io, "cannot create lock " + path.string());
        ::flock(fd_, LOCK_EX);
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

void write_bytes_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    const fs::path tmp = path.string() + temp_suffix();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(DataErrc::io, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError(DataErrc::io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw DataError(DataErrc::io, "cannot rename into " + path.string());
    }
}

std::string join_url(std::string base, const std::string& file) {
    if (!base.empty() && base.back() != '/') base += '/';
    return base + file;
}

IdxTensor parse_file(const fs::path& path) {
    try {
        return parse_idx(read_file_bytes(path));
    } catch (const DataError& e) {
        throw DataError(e.code(), path.filename().string() + ": " + e.what());
    }
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    auto raw = slurp(path);
    if (is_gzip(raw)) return gunzip(raw, path.filename().string());
    return raw;
}

IdxFileNames idx_file_names(Split split) {
    if (split == Split::train)
        return {"train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"};
    return {"t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"};
}

std::string default_mirror(const std::string& name) {
    if (name == "mnist") return "https://ossci-datasets.s3.amazonaws.com/mnist/";
    if (name == "fashion-mnist")
        return "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/";
    throw DataError(DataErrc::parse, "unknown dataset '" + name + "'");
}

Dataset load_dataset(const fs::path& dir, const std::string& name, Split split) {
    const IdxFileNames files = idx_file_names(split);
    auto resolve = [&](const std::string& gz) {
        fs::path p = dir / gz;
        if (fs::exists(p)) return p;
        fs::path plain = dir / gz.substr(0, gz.size() - 3);
        if (fs::exists(plain)) return plain;
        throw DataError(DataErrc::io, "missing dataset file " + p.string());
    };
    return make_dataset(parse_file(resolve(files.images)), parse_file(resolve(files.labels)), name,
                        split);
}

Dataset fetch_dataset(const std::string& name, Split split, const std::string& mirror_url,
                      const fs::path& cache_dir, Transport& transport) {
    if (name != "mnist" && name != "fashion-mnist")
        throw DataError(DataErrc::parse, "unknown dataset '" + name + "'");
    const fs::path dir = cache_dir / name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError(DataErrc::io, "cannot create cache directory " + dir.string());

    for (Split s : {Split::train, Split::test}) {
        const IdxFileNames files = idx_file_names(s);
        for (const std::string& file : {files.images, files.labels}) {
            const fs::path target = dir / file;
            if (fs::exists(target)) continue;
            FileLock lock(dir / ("." + file + ".lock"));
            if (fs::exists(target)) continue;
            std::vector<std::uint8_t> payload = transport.get(join_url(mirror_url, file));
            // Reject corrupt downloads before they enter the cache.
            try {
                parse_idx(is_gzip(payload) ? gunzip(payload, file) : payload);
            } catch (const DataError& e) {
                throw DataError(e.code(), "downloaded " + file + ": " + e.what());
            }
            write_bytes_atomic(target, payload);
        }
    }
    return load_dataset(dir, name, split);
}

// Model archives ------------------------------------------------------------

std::string serialize_archive(const ModelArchive& archive) {
    const NetworkModel& m = archive.model;
    json doc;
    doc["format_version"] = archive.format_version;
    doc["layer_sizes"] = m.layer_sizes;
    doc["tau_ms"] = m.tau;
    doc["v_th_model"] = m.v_th_model;
    json layers = json::array();
    for (const Matrix& w : m.weights) {
        json rows = json::array();
        for (std::size_t r = 0; r < w.rows(); ++r) {
            const auto row = w.row(r);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        layers.push_back(std::move(rows));
    }
    doc["weights"] = std::move(layers);
    doc["provenance"] = archive.provenance;
    return doc.dump(1) + "\n";
}

ModelArchive deserialize_archive(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(DataErrc::parse, std::string("model archive: ") + e.what());
    }
    try {
        ModelArchive a;
        a.format_version = doc.at("format_version").get<int>();
        if (a.format_version != kArchiveFormatVersion)
            throw DataError(DataErrc::unknown_version,
                            "unknown archive format_version " + std::to_string(a.format_version));
        a.model.layer_sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
        a.model.tau = doc.at("tau_ms").get<double>();
        a.model.v_th_model = doc.at("v_th_model").get<double>();
        const json& layers = doc.at("weights");
        if (!layers.is_array() || layers.size() + 1 != a.model.layer_sizes.size())
            throw DataError(DataErrc::shape, "expected one weight matrix per non-input layer");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::size_t rows = a.model.layer_sizes[l + 1];
            const std::size_t cols = a.model.layer_sizes[l];
            const std::string where = "weights of layer " + std::to_string(l + 1);
            const json& jl = layers[l];
            if (!jl.is_array() || jl.size() != rows)
                throw DataError(DataErrc::shape, where + ": expected " + std::to_string(rows) +
                                                     " rows");
            Matrix w(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const json& jr = jl[r];
                if (!jr.is_array() || jr.size() != cols)
                    throw DataError(DataErrc::shape, where + ": row " + std::to_string(r) +
                                                         " should have " + std::to_string(cols) +
                                                         " entries");
                for (std::size_t c = 0; c < cols; ++c) w(r, c) = jr[c].get<double>();
            }
            a.model.weights.push_back(std::move(w));
        }
        if (doc.contains("provenance"))
            a.provenance = doc["provenance"].get<std::map<std::string, std::string>>();
        validate_model(a.model);
        return a;
    } catch (const json::exception& e) {
        throw DataError(DataErrc::parse, std::string("model archive: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(DataErrc::shape, std::string("model archive: ") + e.what());
    }
}

void save_model(const fs::path& path, const ModelArchive& archive) {
    write_text_atomic(path, serialize_archive(archive));
}

ModelArchive load_model(const fs::path& path) {
    const auto bytes = slurp(path);
    return deserialize_archive(std::string(bytes.begin(), bytes.end()));
}

// Tables ----------------------------------------------------------------------

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("row width does not match the table header");
    rows.push_back(std::move(row));
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string format_number(std::int64_t value) { return std::to_string(value); }
std::string format_number(std::size_t value) { return std::to_string(value); }

namespace {

std::string csv_cell(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char ch : cell) {
        if (ch == '"') quoted += '"';
        quoted += ch;
    }
    return quoted + "\"";
}

}  // namespace

std::string to_csv(const Table& table) {
    std::ostringstream os;
    for (const auto& [k, v] : table.meta) os << "# " << k << "=" << v << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        os << (c ? "," : "") << csv_cell(table.columns[c]);
    os << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
        os << "\n";
    }
    return os.str();
}

std::string to_json(const Table& table) {
    json doc;
    json meta = json::object();
    for (const auto& [k, v] : table.meta) meta[k] = v;
    doc["meta"] = std::move(meta);
    json rows = json::array();
    for (const auto& row : table.rows) {
        json obj = json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            // Keep numeric cells numeric in the JSON mirror.
            const std::string& cell = row[c];
            double d = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
            if (ec == std::errc() && p == cell.data() + cell.size() && std::isfinite(d))
                obj[table.columns[c]] = d;
            else
                obj[table.columns[c]] = cell;
        }
        rows.push_back(std::move(obj));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(1) + "\n";
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_bytes_atomic(path, std::span<const std::uint8_t>(
                                 reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Table trace_table(const SimulationResult& result) {
    Table t;
    t.columns = {"layer", "neuron", "time_ms", "potential"};
    for (std::size_t l = 0; l < result.layers.size(); ++l) {
        const LayerActivity& a = result.layers[l];
        for (std::size_t i = 0; i < a.traces.size(); ++i)
            for (const auto& [time, v] : a.traces[i])
                t.add_row({format_number(l), format_number(i), format_number(time),
                           format_number(v)});
    }
    return t;
}

Table spike_table(const SimulationResult& result) {
    Table t;
    t.columns = {"layer", "neuron", "time_ms", "tick"};
    for (std::size_t l = 0; l < result.layers.size(); ++l) {
        const LayerActivity& a = result.layers[l];
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!fired(a.spike_times[i])) continue;
            const std::int64_t tick = a.tick_indices.empty() ? kNoTick : a.tick_indices[i];
            t.add_row({format_number(l), format_number(i), format_number(a.spike_times[i]),
                       format_number(tick)});
        }
    }
    return t;
}

}  // namespace ttfs
