#include "sdslab/rng.hpp"

namespace sdslab {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {
uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}
} // namespace

uint64_t RngPool::stream_seed(std::string_view name) const {
    return splitmix64(root_ ^ fnv1a(name));
}

Rng RngPool::stream(std::string_view name) const { return Rng(stream_seed(name)); }

} // namespace sdslab
