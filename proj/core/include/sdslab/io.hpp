#pragma once

#include "sdslab/grid.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdslab {

// ---- binary tensor container ("DTCK") ----------------------------------
//
// Layout, all little-endian: magic "DTCK", version u32, tensor count u32,
// then per tensor: name length u32, name bytes, rank u32, dims u32[rank],
// row-major float32 data.

struct Tensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t element_count() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }
};

struct CorruptCheckpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_tensor_file(const std::vector<Tensor>& tensors, const std::string& path);
std::vector<Tensor> load_tensor_file(const std::string& path);

// ---- PGM (binary P5, maxval 255) ----------------------------------------

// Values are clamped to [0,1] and quantized to 8 bits.
void write_pgm(const Grid& grid, const std::string& path);
Grid read_pgm(const std::string& path);

// ---- plain-text config --------------------------------------------------
//
// Lines of `key = value`, `#` comments, `[section]` headers. Keys are
// stored as "section.key". Parsing is total: any malformed line throws.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ConfigMap {
public:
    ConfigMap() = default;

    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_text(const std::string& text, const std::string& origin = "<string>");

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    // Typed getters; the key is marked consumed so unknown keys can be
    // rejected afterwards.
    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    uint64_t get_u64(const std::string& key, uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;

    // Throws ConfigError naming the first key never consumed by a getter.
    void reject_unknown_keys() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> consumed_;
};

// ---- CSV -----------------------------------------------------------------

// Minimal writer with a fixed header; numbers are formatted with
// round-trip precision so reruns are byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();

    void row(const std::vector<std::string>& cells);
    void close();

    static std::string num(double v);
    static std::string num(int v) { return std::to_string(v); }
    static std::string num(long v) { return std::to_string(v); }

private:
    std::string path_;
    std::string buf_;
    size_t columns_;
    bool closed_ = false;
};

std::string format_double(double v); // shortest round-trip decimal

} // namespace sdslab
