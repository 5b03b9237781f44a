#include "rexo/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>

namespace rexo {

Tensor::Tensor(std::vector<uint32_t> dims, float fill) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 4)
        throw std::invalid_argument("Tensor: rank must be 1..4");
    size_t n = 1;
    for (uint32_t d : dims_) {
        if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
        n *= d;
    }
    data_.assign(n, fill);
}

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

float Tensor::max_value() const {
    float m = -std::numeric_limits<float>::infinity();
    for (float v : data_) m = std::max(m, v);
    return m;
}

double Tensor::sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
}

void Tensor::argmax2(size_t& row, size_t& col) const {
    if (rank() != 2) throw std::logic_error("argmax2: rank != 2");
    size_t best = 0;
    for (size_t i = 1; i < data_.size(); ++i)
        if (data_[i] > data_[best]) best = i;
    row = best / dims_[1];
    col = best % dims_[1];
}

namespace {
constexpr char kMagic[4] = {'R', 'X', 'H', '1'};

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

void save_rxh(const std::string& path, const Tensor& t) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("save_rxh: cannot open " + path);
    std::fwrite(kMagic, 1, 4, f.get());
    const uint32_t rank = static_cast<uint32_t>(t.rank());
    std::fwrite(&rank, 4, 1, f.get());
    std::fwrite(t.dims().data(), 4, t.rank(), f.get());
    if (std::fwrite(t.data(), 4, t.size(), f.get()) != t.size())
        throw std::runtime_error("save_rxh: short write to " + path);
}

Tensor load_rxh(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("load_rxh: cannot open " + path);
    char magic[4];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_rxh: bad magic in " + path);
    uint32_t rank = 0;
    if (std::fread(&rank, 4, 1, f.get()) != 1 || rank == 0 || rank > 4)
        throw std::runtime_error("load_rxh: bad rank in " + path);
    std::vector<uint32_t> dims(rank);
    if (std::fread(dims.data(), 4, rank, f.get()) != rank)
        throw std::runtime_error("load_rxh: truncated dims in " + path);
    Tensor t(dims);
    if (std::fread(t.data(), 4, t.size(), f.get()) != t.size())
        throw std::runtime_error("load_rxh: truncated payload in " + path);
    return t;
}

}  // namespace rexo
