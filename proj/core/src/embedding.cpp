#include "polarlens/embedding.hpp"

#include "polarlens/common.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace polarlens {

static_assert(std::endian::native == std::endian::little,
              "embeddings.bin I/O assumes a little-endian host");

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, std::vector<float> data,
                                 std::size_t dim)
    : ids_(std::move(ids)), data_(std::move(data)), dim_(dim) {
    if (dim_ == 0) throw domain_error("embedding dimension must be positive");
    if (data_.size() != ids_.size() * dim_)
        throw domain_error("embedding data size does not match ids * dim");
}

void EmbeddingMatrix::append(const std::string& id, std::span<const float> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) throw domain_error("embedding row has wrong dimension");
    double norm2 = 0.0;
    for (float x : v) norm2 += static_cast<double>(x) * x;
    if (norm2 <= 0.0) throw domain_error("cannot store a zero embedding for id " + id);
    float inv = static_cast<float>(1.0 / std::sqrt(norm2));
    ids_.push_back(id);
    for (float x : v) data_.push_back(x * inv);
    index_.clear();
}

std::size_t EmbeddingMatrix::find(const std::string& id) const {
    if (index_.size() != ids_.size()) {
        index_.clear();
        index_.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace_back(ids_[i], i);
        std::sort(index_.begin(), index_.end());
    }
    auto it = std::lower_bound(index_.begin(), index_.end(), id,
                               [](const auto& p, const std::string& k) { return p.first < k; });
    if (it != index_.end() && it->first == id) return it->second;
    return npos;
}

void EmbeddingMatrix::check_unit_norm(double tol) const {
    for (std::size_t i = 0; i < rows(); ++i) {
        double norm2 = 0.0;
        for (float x : row(i)) norm2 += static_cast<double>(x) * x;
        if (std::abs(std::sqrt(norm2) - 1.0) > tol)
            throw domain_error("embedding row " + std::to_string(i) + " (id " + ids_[i] +
                               ") is not unit norm");
    }
}

void save_embeddings(const std::string& bin_path, const std::string& ids_path,
                     const EmbeddingMatrix& m) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw io_error("cannot write embeddings: " + bin_path);
    std::uint32_t n = static_cast<std::uint32_t>(m.rows());
    std::uint32_t e = static_cast<std::uint32_t>(m.dim());
    bin.write("EMB1", 4);
    bin.write(reinterpret_cast<const char*>(&n), 4);
    bin.write(reinterpret_cast<const char*>(&e), 4);
    bin.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.data().size() * sizeof(float)));
    if (!bin) throw io_error("short write to " + bin_path);

    std::ofstream ids(ids_path);
    if (!ids) throw io_error("cannot write embedding ids: " + ids_path);
    for (const auto& id : m.ids()) ids << id << '\n';
}

EmbeddingMatrix load_embeddings(const std::string& bin_path, const std::string& ids_path) {
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw io_error("cannot open embeddings: " + bin_path);
    char magic[4];
    std::uint32_t n = 0, e = 0;
    bin.read(magic, 4);
    bin.read(reinterpret_cast<char*>(&n), 4);
    bin.read(reinterpret_cast<char*>(&e), 4);
    if (!bin || std::memcmp(magic, "EMB1", 4) != 0)
        throw io_error("bad embeddings header in " + bin_path);
    std::vector<float> data(static_cast<std::size_t>(n) * e);
    bin.read(reinterpret_cast<char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!bin) throw io_error("truncated embeddings data in " + bin_path);

    std::ifstream ids(ids_path);
    if (!ids) throw io_error("cannot open embedding ids: " + ids_path);
    std::vector<std::string> id_list;
    id_list.reserve(n);
    std::string line;
    while (std::getline(ids, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        id_list.push_back(line);
    }
    if (id_list.size() != n)
        throw io_error("id sidecar has " + std::to_string(id_list.size()) + " lines, expected " +
                       std::to_string(n));
    return EmbeddingMatrix(std::move(id_list), std::move(data), e);
}

std::string ids_sidecar_path(const std::string& bin_path) {
    auto dot = bin_path.find_last_of('.');
    auto slash = bin_path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return bin_path + ".ids";
    return bin_path.substr(0, dot) + ".ids";
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw domain_error("cosine_sim: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = static_cast<double>(a[i]);
        double y = static_cast<double>(b[i]);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na <= 0.0 || nb <= 0.0) throw domain_error("cosine_sim: zero vector");
    double s = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(s, -1.0, 1.0);
}

} // namespace

double cosine_sim(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_sim(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

} // namespace polarlens
