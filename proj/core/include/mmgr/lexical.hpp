#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mmgr/metrics.hpp"
#include "mmgr/types.hpp"

namespace mmgr {

/// Lowercased alphanumeric runs, deduplicated, in first-seen order.
std::vector<std::string> tokenize(std::string_view text);

/// Word-overlap baseline: scores each source by the size of the token-set
/// intersection with the question and marks the `k` best as positive. Ties go
/// to the source listed first. Missing text counts as empty.
QuestionPrediction lexical_overlap(const QuestionInstance& inst, std::size_t k = 2);
std::vector<QuestionPrediction> lexical_overlap(const std::vector<QuestionInstance>& instances, std::size_t k = 2);

}  // namespace mmgr
