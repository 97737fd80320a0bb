#pragma once

#include "ctour/cluster.hpp"
#include "ctour/projection.hpp"
#include "ctour/validation.hpp"

#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <variant>

namespace ctour {

inline constexpr std::size_t kCacheCapacity = 256;

// Bounded LRU over clustering instances and embeddings, keyed by content hash.
// Safe to share between threads.
class PrecomputeCache {
public:
    explicit PrecomputeCache(std::size_t capacity = kCacheCapacity);

    std::optional<ClusteringInstance> find_instance(std::uint64_t key);
    std::optional<Embedding> find_embedding(std::uint64_t key);
    void insert(std::uint64_t key, ClusteringInstance inst);
    void insert(std::uint64_t key, Embedding e);

    ClusteringInstance clustering(const Dataset& ds, const ClusteringParams& p);
    Embedding embedding(const Dataset& ds, const ClusteringInstance& inst, const ProjectionParams& p);
    ClusterRunner runner(const Dataset& ds);

    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }
    std::uint64_t hits() const;
    std::uint64_t misses() const;
    void clear();

private:
    using Value = std::variant<ClusteringInstance, Embedding>;
    std::optional<Value> lookup(std::uint64_t key);
    void store(std::uint64_t key, Value v);

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<std::pair<std::uint64_t, Value>> order_;  // most recent first
    std::unordered_map<std::uint64_t, std::list<std::pair<std::uint64_t, Value>>::iterator> index_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

std::uint64_t embedding_key(const ClusteringInstance& inst, const ProjectionParams& p);

struct PrecomputeReport {
    std::vector<int> k_values;
    std::size_t computed = 0;  // clusterings that actually ran
    std::size_t cached = 0;    // already present
};

// Fills the cache for every k in [lo, hi] on top of base.
PrecomputeReport precompute_k_range(PrecomputeCache& cache, const Dataset& ds, const ClusteringParams& base, int lo,
                                    int hi);

}  // namespace ctour
