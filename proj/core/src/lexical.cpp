#include "mmgr/lexical.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <unordered_set>

namespace mmgr {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && seen.insert(cur).second) out.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

QuestionPrediction lexical_overlap(const QuestionInstance& inst, std::size_t k) {
    const auto qtokens = tokenize(inst.question_text.value_or(""));
    const std::unordered_set<std::string> qset(qtokens.begin(), qtokens.end());

    QuestionPrediction out;
    out.question_id = inst.question_id;
    out.category = inst.category;
    for (const auto& src : inst.sources) {
        SourcePrediction s;
        s.source_id = src.source_id;
        s.modality = src.modality;
        s.label = src.label;
        for (const auto& t : tokenize(src.raw_text.value_or("")))
            if (qset.count(t)) s.score += 1.0;
        out.sources.push_back(std::move(s));
    }

    std::vector<std::size_t> order(out.sources.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.sources[a].score > out.sources[b].score; });
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.sources[order[i]].predicted = 1;
    return out;
}

std::vector<QuestionPrediction> lexical_overlap(const std::vector<QuestionInstance>& instances, std::size_t k) {
    std::vector<QuestionPrediction> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(lexical_overlap(inst, k));
    return out;
}

}  // namespace mmgr
