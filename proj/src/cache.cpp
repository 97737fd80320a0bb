#include "ctour/cache.hpp"

#include "ctour/error.hpp"
#include "ctour/parallel.hpp"
#include "ctour/rng.hpp"

namespace ctour {

PrecomputeCache::PrecomputeCache(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "cache capacity must be positive");
}

std::optional<PrecomputeCache::Value> PrecomputeCache::lookup(std::uint64_t key) {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it == index_.end()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
}

void PrecomputeCache::store(std::uint64_t key, Value v) {
    std::lock_guard lock(mutex_);
    const auto it = index_.find(key);
    if (it != index_.end()) {
        it->second->second = std::move(v);
        order_.splice(order_.begin(), order_, it->second);
        return;
    }
    order_.emplace_front(key, std::move(v));
    index_[key] = order_.begin();
    while (order_.size() > capacity_) {
        index_.erase(order_.back().first);
        order_.pop_back();
    }
}

std::optional<ClusteringInstance> PrecomputeCache::find_instance(std::uint64_t key) {
    auto v = lookup(key);
    if (!v) return std::nullopt;
    if (auto* inst = std::get_if<ClusteringInstance>(&*v)) return std::move(*inst);
    return std::nullopt;
}

std::optional<Embedding> PrecomputeCache::find_embedding(std::uint64_t key) {
    auto v = lookup(key);
    if (!v) return std::nullopt;
    if (auto* e = std::get_if<Embedding>(&*v)) return std::move(*e);
    return std::nullopt;
}

void PrecomputeCache::insert(std::uint64_t key, ClusteringInstance inst) { store(key, std::move(inst)); }
void PrecomputeCache::insert(std::uint64_t key, Embedding e) { store(key, std::move(e)); }

ClusteringInstance PrecomputeCache::clustering(const Dataset& ds, const ClusteringParams& p) {
    const std::uint64_t key = compute_cache_key(ds.fingerprint(), nullptr, p);
    if (auto hit = find_instance(key)) return *hit;
    ClusteringInstance inst = run_clustering(ds, p);
    insert(key, inst);
    return inst;
}

std::uint64_t embedding_key(const ClusteringInstance& inst, const ProjectionParams& p) {
    Fnv1a h;
    h.add(std::string_view("embedding"));
    h.add(inst.cache_key);
    h.add(static_cast<std::uint64_t>(p.method));
    h.add(static_cast<std::uint64_t>(p.metric));
    h.add(p.perplexity);
    h.add(static_cast<std::int64_t>(p.iterations));
    h.add(p.seed);
    return h.value();
}

Embedding PrecomputeCache::embedding(const Dataset& ds, const ClusteringInstance& inst, const ProjectionParams& p) {
    const std::uint64_t key = embedding_key(inst, p);
    if (auto hit = find_embedding(key)) return *hit;
    Embedding e = project(instance_matrix(ds, inst), p);
    insert(key, e);
    return e;
}

ClusterRunner PrecomputeCache::runner(const Dataset& ds) {
    return [this, &ds](const ClusteringParams& p) { return clustering(ds, p); };
}

std::size_t PrecomputeCache::size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
}

std::uint64_t PrecomputeCache::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::uint64_t PrecomputeCache::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

void PrecomputeCache::clear() {
    std::lock_guard lock(mutex_);
    order_.clear();
    index_.clear();
    hits_ = misses_ = 0;
}

PrecomputeReport precompute_k_range(PrecomputeCache& cache, const Dataset& ds, const ClusteringParams& base, int lo,
                                    int hi) {
    if (lo < 1 || hi < lo) throw Error(ErrorCode::InvalidArgument, "invalid k range");
    if (static_cast<std::size_t>(hi - lo + 1) > cache.capacity()) {
        throw Error(ErrorCode::InvalidArgument, "k range larger than the cache");
    }
    PrecomputeReport report;
    std::vector<ClusteringParams> todo;
    for (int k = lo; k <= hi; ++k) {
        ClusteringParams p = base;
        p.k = k;
        validate_params(p, ds.features());
        report.k_values.push_back(k);
        if (cache.find_instance(compute_cache_key(ds.fingerprint(), nullptr, p))) {
            ++report.cached;
        } else {
            todo.push_back(p);
        }
    }
    std::vector<ClusteringInstance> results(todo.size());
    parallel_for(todo.size(), [&](std::size_t i) { results[i] = run_clustering(ds, todo[i]); });
    for (std::size_t i = 0; i < todo.size(); ++i) {
        cache.insert(results[i].cache_key, std::move(results[i]));
    }
    report.computed = todo.size();
    return report;
}

}  // namespace ctour
