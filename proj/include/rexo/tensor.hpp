#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace rexo {

// Dense row-major float tensor, rank 1..4. Heatmaps, pyramid levels and
// crops all use this; payload layout matches the RXH1 file format.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<uint32_t> dims, float fill = 0.0f);

    // Dims vector from arbitrary integral sizes.
    template <typename... I>
    static std::vector<uint32_t> shape(I... is) {
        return {static_cast<uint32_t>(is)...};
    }

    static Tensor zeros2(uint32_t a, uint32_t b) { return Tensor({a, b}); }
    static Tensor zeros3(uint32_t a, uint32_t b, uint32_t c) { return Tensor({a, b, c}); }

    const std::vector<uint32_t>& dims() const { return dims_; }
    uint32_t dim(size_t i) const { return dims_[i]; }
    size_t rank() const { return dims_.size(); }
    size_t size() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& at(size_t i) { return data_[i]; }
    float at(size_t i) const { return data_[i]; }
    float& at(size_t i, size_t j) { return data_[i * dims_[1] + j]; }
    float at(size_t i, size_t j) const { return data_[i * dims_[1] + j]; }
    float& at(size_t i, size_t j, size_t k) { return data_[(i * dims_[1] + j) * dims_[2] + k]; }
    float at(size_t i, size_t j, size_t k) const { return data_[(i * dims_[1] + j) * dims_[2] + k]; }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
    bool all_finite() const;
    float max_value() const;
    double sum() const;

    // argmax over a 2D tensor, first occurrence wins
    void argmax2(size_t& row, size_t& col) const;

    bool operator==(const Tensor& o) const { return dims_ == o.dims_ && data_ == o.data_; }

private:
    std::vector<uint32_t> dims_;
    std::vector<float> data_;
};

// RXH1 tensor file: little-endian, magic "RXH1", u32 rank, u32 dims..., f32
// payload row-major.
void save_rxh(const std::string& path, const Tensor& t);
Tensor load_rxh(const std::string& path);

}  // namespace rexo
