#include "schemacoder/embedding.hpp"

#include "schemacoder/errors.hpp"
#include "schemacoder/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace schemacoder {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

std::vector<std::uint64_t> gram_hashes(const std::string& text) {
    std::vector<std::uint64_t> grams;
    if (text.size() < 3) {
        if (!text.empty()) grams.push_back(fnv1a64(text));
        return grams;
    }
    grams.reserve(text.size() - 2);
    for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
        grams.push_back(fnv1a64(std::string_view(text).substr(i, 3)));
    }
    return grams;
}

}  // namespace

std::vector<EmbeddingVector> embed_chunks(const std::vector<Chunk>& chunks, std::size_t dim) {
    if (dim < 16) throw std::invalid_argument("embed_chunks: dim must be >= 16");

    // Document frequency per gram hash across all chunks.
    std::unordered_map<std::uint64_t, std::size_t> df;
    std::vector<std::unordered_map<std::uint64_t, std::size_t>> tf(chunks.size());
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        for (std::uint64_t g : gram_hashes(chunks[c].text)) ++tf[c][g];
        for (const auto& [g, count] : tf[c]) {
            (void)count;
            ++df[g];
        }
    }

    const double n_docs = static_cast<double>(chunks.size());
    std::vector<EmbeddingVector> out(chunks.size());
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        EmbeddingVector& vec = out[c];
        vec.chunk_id = chunks[c].id;
        vec.values.assign(dim, 0.0);
        for (const auto& [g, count] : tf[c]) {
            double idf = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[g]))) + 1.0;
            vec.values[g % dim] += static_cast<double>(count) * idf;
        }
        double norm = 0.0;
        for (double v : vec.values) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& v : vec.values) v /= norm;
        }
    }
    return out;
}

Clustering cluster(const std::vector<EmbeddingVector>& vectors, std::optional<int> k,
                   std::uint64_t seed) {
    if (vectors.empty()) throw std::invalid_argument("cluster: vectors must be non-empty");
    const int n = static_cast<int>(vectors.size());
    int kk = k.value_or(std::min(8, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))))));
    if (kk < 1 || kk > n) throw std::invalid_argument("cluster: k out of range");

    SplitMix64 rng(seed);
    const std::size_t dim = vectors.front().values.size();
    for (const auto& v : vectors) {
        if (v.values.size() != dim) throw std::invalid_argument("cluster: inconsistent dimensions");
    }

    // k-means++ seeding.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<std::size_t>(kk));
    centroids.push_back(vectors[rng.next_below(static_cast<std::uint64_t>(n))].values);
    std::vector<double> dist2(static_cast<std::size_t>(n), 0.0);
    while (static_cast<int>(centroids.size()) < kk) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centroids) {
                best = std::min(best, squared_distance(vectors[static_cast<std::size_t>(i)].values, c));
            }
            dist2[static_cast<std::size_t>(i)] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.next_below(static_cast<std::uint64_t>(n));
        } else {
            double r = rng.next_double() * total;
            pick = 0;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += dist2[static_cast<std::size_t>(i)];
                if (acc >= r) {
                    pick = static_cast<std::size_t>(i);
                    break;
                }
            }
        }
        centroids.push_back(vectors[pick].values);
    }

    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < 100; ++iter) {
        // Assignment step; ties go to the lowest cluster index.
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int best_c = 0;
            for (int c = 0; c < kk; ++c) {
                double d = squared_distance(vectors[static_cast<std::size_t>(i)].values,
                                            centroids[static_cast<std::size_t>(c)]);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            assign[static_cast<std::size_t>(i)] = best_c;
        }

        // Update step.
        std::vector<std::vector<double>> next(static_cast<std::size_t>(kk),
                                              std::vector<double>(dim, 0.0));
        std::vector<int> counts(static_cast<std::size_t>(kk), 0);
        for (int i = 0; i < n; ++i) {
            int c = assign[static_cast<std::size_t>(i)];
            ++counts[static_cast<std::size_t>(c)];
            const auto& v = vectors[static_cast<std::size_t>(i)].values;
            for (std::size_t d = 0; d < dim; ++d) next[static_cast<std::size_t>(c)][d] += v[d];
        }
        for (int c = 0; c < kk; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) {
                // Re-seed an empty cluster with the point farthest from its
                // assigned centroid.
                double worst = -1.0;
                int worst_i = 0;
                for (int i = 0; i < n; ++i) {
                    int ci = assign[static_cast<std::size_t>(i)];
                    if (counts[static_cast<std::size_t>(ci)] <= 1) continue;
                    double d = squared_distance(vectors[static_cast<std::size_t>(i)].values,
                                                centroids[static_cast<std::size_t>(ci)]);
                    if (d > worst) {
                        worst = d;
                        worst_i = i;
                    }
                }
                next[static_cast<std::size_t>(c)] = vectors[static_cast<std::size_t>(worst_i)].values;
                counts[static_cast<std::size_t>(c)] = 1;
                int old = assign[static_cast<std::size_t>(worst_i)];
                --counts[static_cast<std::size_t>(old)];
                assign[static_cast<std::size_t>(worst_i)] = c;
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d) {
                next[static_cast<std::size_t>(c)][d] /= counts[static_cast<std::size_t>(c)];
            }
        }

        double shift = 0.0;
        for (int c = 0; c < kk; ++c) {
            shift = std::max(shift, squared_distance(centroids[static_cast<std::size_t>(c)],
                                                     next[static_cast<std::size_t>(c)]));
        }
        centroids = std::move(next);
        if (std::sqrt(shift) < 1e-6) break;
    }

    // Final assignment against the converged centroids.
    for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        int best_c = 0;
        for (int c = 0; c < kk; ++c) {
            double d = squared_distance(vectors[static_cast<std::size_t>(i)].values,
                                        centroids[static_cast<std::size_t>(c)]);
            if (d < best) {
                best = d;
                best_c = c;
            }
        }
        assign[static_cast<std::size_t>(i)] = best_c;
    }

    // Every cluster must end non-empty; steal the farthest point from a
    // multi-member cluster when one is not.
    std::vector<int> counts(static_cast<std::size_t>(kk), 0);
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    for (int c = 0; c < kk; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        double worst = -1.0;
        int worst_i = 0;
        for (int i = 0; i < n; ++i) {
            int ci = assign[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(ci)] <= 1) continue;
            double d = squared_distance(vectors[static_cast<std::size_t>(i)].values,
                                        centroids[static_cast<std::size_t>(ci)]);
            if (d > worst) {
                worst = d;
                worst_i = i;
            }
        }
        --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(worst_i)])];
        assign[static_cast<std::size_t>(worst_i)] = c;
        ++counts[static_cast<std::size_t>(c)];
        centroids[static_cast<std::size_t>(c)] = vectors[static_cast<std::size_t>(worst_i)].values;
    }

    Clustering result;
    result.k = kk;
    result.seed = seed;
    result.centroids = centroids;
    for (int i = 0; i < n; ++i) {
        result.assignments[vectors[static_cast<std::size_t>(i)].chunk_id] =
            assign[static_cast<std::size_t>(i)];
    }
    return result;
}

std::vector<int> sample_representatives(const Clustering& clustering,
                                        const std::vector<EmbeddingVector>& vectors,
                                        int per_cluster, std::uint64_t seed) {
    if (per_cluster < 1) throw std::invalid_argument("sample_representatives: per_cluster must be >= 1");

    std::unordered_map<int, const EmbeddingVector*> by_id;
    for (const auto& v : vectors) by_id[v.chunk_id] = &v;

    std::vector<int> out;
    for (int c = 0; c < clustering.k; ++c) {
        struct Member {
            int chunk_id;
            double dist;
        };
        std::vector<Member> members;
        for (const auto& [chunk_id, assigned] : clustering.assignments) {
            if (assigned != c) continue;
            const auto* vec = by_id.at(chunk_id);
            members.push_back(Member{
                chunk_id,
                squared_distance(vec->values, clustering.centroids[static_cast<std::size_t>(c)])});
        }
        std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return a.chunk_id < b.chunk_id;
        });
        if (members.empty()) continue;

        std::vector<Member> chosen;
        chosen.push_back(members.front());  // canonical exemplar
        std::vector<Member> rest(members.begin() + 1, members.end());
        SplitMix64 rng(seed ^ (0x5bd1e995u * static_cast<std::uint64_t>(c + 1)));
        int wanted = per_cluster - 1;
        while (wanted > 0 && !rest.empty()) {
            std::size_t pick = rng.next_below(rest.size());
            chosen.push_back(rest[pick]);
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pick));
            --wanted;
        }
        std::sort(chosen.begin(), chosen.end(), [](const Member& a, const Member& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return a.chunk_id < b.chunk_id;
        });
        for (const auto& m : chosen) out.push_back(m.chunk_id);
    }
    return out;
}

namespace {

double norm_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

PcaResult pca_project(const std::vector<EmbeddingVector>& vectors, std::size_t dims) {
    if (vectors.size() < dims) {
        throw std::invalid_argument("pca_project: need at least `dims` vectors");
    }
    const std::size_t n = vectors.size();
    const std::size_t dim = vectors.front().values.size();

    std::vector<double> mean(dim, 0.0);
    for (const auto& v : vectors) {
        for (std::size_t d = 0; d < dim; ++d) mean[d] += v.values[d];
    }
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> centered(n, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) centered[i][d] = vectors[i].values[d] - mean[d];
    }

    // Covariance matrix, deflated in place after each extracted component.
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto& row : centered) {
        for (std::size_t a = 0; a < dim; ++a) {
            if (row[a] == 0.0) continue;
            for (std::size_t b = 0; b < dim; ++b) cov[a][b] += row[a] * row[b];
        }
    }
    for (auto& row : cov) {
        for (double& x : row) x /= denom;
    }

    auto cov_times = [&](const std::vector<double>& v) {
        std::vector<double> out(dim, 0.0);
        for (std::size_t a = 0; a < dim; ++a) {
            double sum = 0.0;
            const auto& row = cov[a];
            for (std::size_t b = 0; b < dim; ++b) sum += row[b] * v[b];
            out[a] = sum;
        }
        return out;
    };

    PcaResult result;
    result.points.assign(n, std::vector<double>(dims, 0.0));

    for (std::size_t comp = 0; comp < dims; ++comp) {
        SplitMix64 rng(0x9e3779b9u + comp);
        std::vector<double> v(dim);
        for (double& x : v) x = rng.next_double() - 0.5;
        double nv = norm_of(v);
        for (double& x : v) x /= nv;

        double lambda = 0.0;
        for (int iter = 0; iter < 200000; ++iter) {
            std::vector<double> w = cov_times(v);
            double wn = norm_of(w);
            if (wn < 1e-14) {
                lambda = 0.0;
                break;
            }
            for (double& x : w) x /= wn;
            double delta = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                double diff = w[d] - v[d];
                double sum = w[d] + v[d];
                delta = std::max(delta, std::min(std::abs(diff), std::abs(sum)));
            }
            v = std::move(w);
            lambda = wn;
            if (delta < 1e-9) break;
        }

        if (lambda < 1e-12) {
            result.degenerate = true;
            result.components.push_back(std::vector<double>(dim, 0.0));
            result.explained_variance.push_back(0.0);
            continue;
        }

        // Eigenvalue from the Rayleigh quotient on the deflated matrix.
        std::vector<double> cv = cov_times(v);
        double eig = 0.0;
        for (std::size_t d = 0; d < dim; ++d) eig += v[d] * cv[d];

        // Sign convention: largest-magnitude loading is positive.
        std::size_t max_idx = 0;
        for (std::size_t d = 1; d < dim; ++d) {
            if (std::abs(v[d]) > std::abs(v[max_idx])) max_idx = d;
        }
        if (v[max_idx] < 0.0) {
            for (double& x : v) x = -x;
        }

        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) dot += centered[i][d] * v[d];
            result.points[i][comp] = dot;
        }

        // Deflate: remove the extracted component's variance.
        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t b = 0; b < dim; ++b) cov[a][b] -= eig * v[a] * v[b];
        }
        result.components.push_back(std::move(v));
        result.explained_variance.push_back(eig);
    }
    return result;
}

}  // namespace schemacoder
