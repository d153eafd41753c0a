#pragma once

// JSON views of analysis results. Numbers are written with 17 significant
// digits; non-finite values become null.

#include "dlab/dichotomy.hpp"
#include "dlab/floquet.hpp"
#include "dlab/linearize.hpp"
#include "dlab/reduce.hpp"
#include "dlab/spectrum.hpp"

#include <json.hpp>

#include <string>

namespace dlab {

using Json = nlohmann::ordered_json;

std::string format_number(double v);
/// Deterministic text: keys in insertion order, 17-digit numbers.
std::string format_json(const Json& j, int indent = 2);

Json to_json(const Mat& m);
Json to_json(const Vec& v);
Json to_json(const CMat& m);

Json to_json(const DichotomyCertificate& c);
Json to_json(const FloquetData& f);
Json to_json(const SpectrumReport& s);
Json to_json(const ReductionResult& r);
Json to_json(const LinearizationContext& c);
Json to_json(const MapEvaluation& e);

/// FNV-1a 64 of the text, as 16 hex digits.
std::string text_hash(const std::string& text);

}  // namespace dlab
