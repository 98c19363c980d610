#ifndef POLARLENS_EMBEDDING_HPP
#define POLARLENS_EMBEDDING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polarlens {

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

/// Row-major matrix of unit-norm text vectors, f32 storage. Immutable once
/// built; similarity math accumulates in double.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> ids, std::vector<float> data, std::size_t dim);

    std::size_t rows() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::vector<float>& data() const { return data_; }

    /// Appends a row; normalizes it to unit length. Zero vectors throw.
    void append(const std::string& id, std::span<const float> v);

    /// Index of an id, or npos. Built lazily on first call.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t find(const std::string& id) const;

    /// Verifies every row has unit norm within tol; throws domain_error.
    void check_unit_norm(double tol = 1e-6) const;

private:
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::size_t dim_ = 0;
    mutable std::vector<std::pair<std::string, std::size_t>> index_; // sorted by id
};

/// embeddings.bin: magic "EMB1", u32 N, u32 E, then N*E little-endian f32
/// row-major. Ids live in a sidecar (one per line, N lines); by convention
/// the sidecar path is the data path with extension replaced by ".ids".
void save_embeddings(const std::string& bin_path, const std::string& ids_path,
                     const EmbeddingMatrix& m);
EmbeddingMatrix load_embeddings(const std::string& bin_path, const std::string& ids_path);

std::string ids_sidecar_path(const std::string& bin_path);

/// Cosine of the angle between two vectors, clamped to [-1, 1]. Throws
/// domain_error on a zero vector.
double cosine_sim(std::span<const float> a, std::span<const float> b);
double cosine_sim(std::span<const double> a, std::span<const double> b);

} // namespace polarlens

#endif
