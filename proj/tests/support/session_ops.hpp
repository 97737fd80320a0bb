#pragma once

// Random operation driver for session property checks.

#include "ctour/error.hpp"
#include "ctour/session.hpp"

#include <string>
#include <vector>

namespace ctour::testing {

inline Json quick_tour_config() { return Json{{"compute_embeddings", false}, {"batch", 4}}; }

// Applies random operations until `count` have succeeded (rejected ones are
// not logged and do not count). Returns the number applied.
inline std::size_t apply_random_ops(Session& s, Rng& rng, std::size_t count, std::size_t max_attempts = 1000) {
    std::size_t applied = 0;
    for (std::size_t attempt = 0; applied < count && attempt < max_attempts; ++attempt) {
        const auto& views = s.views();
        const auto& tours = s.tours();
        const auto any_view = [&] { return views[rng.below(views.size())].id; };
        Json params;
        std::string op;
        const std::size_t choice = views.empty() ? 0 : rng.below(10);
        switch (choice) {
            case 0:
                op = "add_view";
                params = {{"params",
                           {{"k", 2 + static_cast<int>(rng.below(4))},
                            {"algorithm", rng.bernoulli(0.5) ? "kmeans" : "agglomerative"}}}};
                break;
            case 1: op = "set_k", params = {{"view", any_view()}, {"k", 2 + static_cast<int>(rng.below(5))}}; break;
            case 2: op = "set_active", params = {{"view", any_view()}}; break;
            case 3:
                op = "rename_cluster";
                params = {{"view", any_view()}, {"cluster", 0}, {"name", "n" + std::to_string(rng.below(100))}};
                break;
            case 4: op = "remove_view", params = {{"view", any_view()}}; break;
            case 5:
                op = "set_feature_enabled";
                params = {{"feature", rng.below(s.dataset().features())}, {"enabled", rng.bernoulli(0.5)}};
                break;
            case 6:
                op = "start_tour";
                params = {{"view", any_view()}, {"seed", rng.below(1000)}, {"config", quick_tour_config()}};
                break;
            case 7:
            case 8: {
                if (tours.empty()) continue;
                static const char* kinds[] = {"generate", "generate", "like", "bad"};
                op = "tour_step";
                params = {{"tour", tours[rng.below(tours.size())].id}, {"feedback", kinds[rng.below(4)]}};
                break;
            }
            default: {
                const auto id = any_view();
                const auto& inst = s.view(id).instance;
                std::vector<std::size_t> rows(inst.rows.begin(),
                                              inst.rows.begin() + static_cast<std::ptrdiff_t>(inst.rows.size() / 2));
                op = "isolate";
                params = {{"view", id}, {"rows", rows}, {"params", {{"k", 2}}}};
            }
        }
        try {
            s.apply(op, params);
            ++applied;
        } catch (const Error&) {
        }
    }
    return applied;
}

}  // namespace ctour::testing
