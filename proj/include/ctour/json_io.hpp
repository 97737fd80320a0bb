#pragma once

#include "ctour/cluster.hpp"
#include "ctour/data.hpp"
#include "ctour/projection.hpp"
#include "ctour/tour.hpp"

#include <json.hpp>

namespace ctour {

using Json = nlohmann::json;

// Non-finite doubles are written as null (NaN) or the strings "inf"/"-inf".
Json number_to_json(double v);
double number_from_json(const Json& j);

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json params_to_json(const ClusteringParams& p);
ClusteringParams params_from_json(const Json& j);
// Lenient form used by the API: missing fields take dataset defaults and
// features may be given by name.
ClusteringParams params_from_request(const Json& j, const Dataset& ds);

Json instance_to_json(const ClusteringInstance& inst);
ClusteringInstance instance_from_json(const Json& j);

Json embedding_to_json(const Embedding& e);
Embedding embedding_from_json(const Json& j);

Json constraints_to_json(const TourConstraints& c);
// Accepts {"k": {"mode": "fixed", "value": 4}, "metric": "free", ...}; fixed
// values missing from the request are taken from base.
TourConstraints constraints_from_json(const Json& j, const ClusteringParams& base, const Dataset* ds = nullptr);

Json tour_to_json(const TourState& s);
TourState tour_from_json(const Json& j);

Json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const Json& j);

}  // namespace ctour
