#include "sdslab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sdslab {

namespace {
constexpr char kMagic[4] = {'D', 'T', 'C', 'K'};

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    uint32_t u32() {
        if (pos + 4 > buf.size()) throw CorruptCheckpoint("checkpoint truncated");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }

    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string bytes(size_t n) {
        if (pos + n > buf.size()) throw CorruptCheckpoint("checkpoint truncated");
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string slurp(const std::string& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spew(const std::string& path, const std::string& data, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}
} // namespace

void save_tensor_file(const std::vector<Tensor>& tensors, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const Tensor& t : tensors) {
        put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.append(t.name);
        put_u32(out, static_cast<uint32_t>(t.dims.size()));
        for (uint32_t d : t.dims) put_u32(out, d);
        if (t.data.size() != t.element_count())
            throw std::invalid_argument("tensor '" + t.name + "': dims do not match payload");
        for (float v : t.data) put_f32(out, v);
    }
    spew(path, out, std::ios::binary);
}

std::vector<Tensor> load_tensor_file(const std::string& path) {
    const std::string buf = slurp(path, std::ios::binary);
    Reader r{buf};
    const std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw CorruptCheckpoint("bad checkpoint magic \"" + magic + "\" in " + path);
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
    const uint32_t count = r.u32();
    std::vector<Tensor> tensors(count);
    for (Tensor& t : tensors) {
        const uint32_t name_len = r.u32();
        t.name = r.bytes(name_len);
        const uint32_t rank = r.u32();
        t.dims.resize(rank);
        for (uint32_t& d : t.dims) d = r.u32();
        const size_t n = t.element_count();
        t.data.resize(n);
        for (float& v : t.data) v = r.f32();
    }
    if (r.pos != buf.size()) throw CorruptCheckpoint("trailing bytes in checkpoint " + path);
    return tensors;
}

// ---- PGM ------------------------------------------------------------------

void write_pgm(const Grid& grid, const std::string& path) {
    std::string out = "P5\n" + std::to_string(grid.cols) + " " + std::to_string(grid.rows) + "\n255\n";
    out.reserve(out.size() + grid.size());
    for (double v : grid.v) {
        const double c = std::clamp(v, 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
    }
    spew(path, out, std::ios::binary);
}

Grid read_pgm(const std::string& path) {
    const std::string buf = slurp(path, std::ios::binary);
    size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        if (pos < buf.size() && buf[pos] == '#') { // comment line
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
            while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        }
        const size_t start = pos;
        while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        if (start == pos) throw std::runtime_error("malformed PGM header: " + path);
        return buf.substr(start, pos - start);
    };
    if (token() != "P5") throw std::runtime_error("malformed PGM header (expected P5): " + path);
    const int cols = std::stoi(token());
    const int rows = std::stoi(token());
    const int maxval = std::stoi(token());
    if (cols <= 0 || rows <= 0 || maxval != 255)
        throw std::runtime_error("malformed PGM header: " + path);
    ++pos; // single whitespace byte after maxval
    if (buf.size() - pos < static_cast<size_t>(rows) * cols)
        throw std::runtime_error("truncated PGM payload: " + path);
    Grid g(rows, cols);
    for (size_t i = 0; i < g.size(); ++i)
        g.v[i] = static_cast<unsigned char>(buf[pos + i]) / 255.0;
    return g;
}

// ---- config ---------------------------------------------------------------

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}
} // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

ConfigMap ConfigMap::parse_text(const std::string& text, const std::string& origin) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.kv_.count(full))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + full + "`");
        cfg.kv_[full] = value;
    }
    return cfg;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& def) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

double ConfigMap::get_double(const std::string& key, double def) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key `" + key + "`: expected a number, got `" + it->second + "`");
    }
}

int ConfigMap::get_int(const std::string& key, int def) const {
    const double v = get_double(key, static_cast<double>(def));
    const int i = static_cast<int>(std::llround(v));
    if (static_cast<double>(i) != v)
        throw ConfigError("key `" + key + "`: expected an integer");
    return i;
}

uint64_t ConfigMap::get_u64(const std::string& key, uint64_t def) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ConfigError("key `" + key + "`: expected an unsigned integer, got `" + it->second + "`");
    }
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key `" + key + "`: expected true/false, got `" + it->second + "`");
}

void ConfigMap::reject_unknown_keys() const {
    for (const auto& [key, value] : kv_)
        if (!consumed_.count(key))
            throw ConfigError("unknown config key `" + key + "`");
}

// ---- CSV ------------------------------------------------------------------

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += header[i];
    }
    buf_ += '\n';
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
    }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::invalid_argument("CSV row width mismatch");
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += cells[i];
    }
    buf_ += '\n';
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    spew(path_, buf_, std::ios::out);
}

std::string CsvWriter::num(double v) { return format_double(v); }

} // namespace sdslab
