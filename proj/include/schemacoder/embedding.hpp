#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "schemacoder/corpus.hpp"

namespace schemacoder {

struct EmbeddingVector {
    int chunk_id = 0;
    std::vector<double> values;
};

struct Clustering {
    std::map<int, int> assignments;  // chunk_id -> cluster_id
    std::vector<std::vector<double>> centroids;
    int k = 0;
    std::uint64_t seed = 0;
};

// Hashed character-3-gram TF-IDF, L2-normalized. Empty chunk text yields
// the zero vector.
std::vector<EmbeddingVector> embed_chunks(const std::vector<Chunk>& chunks, std::size_t dim = 256);

// Seeded k-means with k-means++ initialization. When k is absent,
// k = min(8, ceil(sqrt(n))). Converges when the max centroid shift drops
// below 1e-6 or after 100 iterations.
Clustering cluster(const std::vector<EmbeddingVector>& vectors, std::optional<int> k,
                   std::uint64_t seed);

// For each cluster: the member nearest its centroid plus seeded uniform
// samples without replacement. Ordered by cluster id, then distance.
std::vector<int> sample_representatives(const Clustering& clustering,
                                        const std::vector<EmbeddingVector>& vectors,
                                        int per_cluster, std::uint64_t seed);

struct PcaResult {
    std::vector<std::vector<double>> points;      // one row per vector
    std::vector<std::vector<double>> components;  // orthonormal directions
    std::vector<double> explained_variance;
    bool degenerate = false;  // rank < requested dims; missing axes zero-padded
};

// Projection onto the top principal components of the mean-centered data,
// via power iteration with deflation (tolerance 1e-9). Component sign is
// fixed so the largest-magnitude loading is positive.
PcaResult pca_project(const std::vector<EmbeddingVector>& vectors, std::size_t dims = 2);

}  // namespace schemacoder
