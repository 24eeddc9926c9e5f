#include "cdstack/stacker.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cdstack/errors.hpp"

namespace cdstack {

Level1Dataset assemble(const std::vector<LearnerOutput>& outputs, const KnownCauseLabels& labels,
                       bool zero_noncausal) {
    if (outputs.size() < 2) throw DataError("assemble: need at least 2 learner outputs");

    // canonical column order
    std::vector<std::size_t> order(outputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (outputs[a].dataset_id != outputs[b].dataset_id)
            return outputs[a].dataset_id < outputs[b].dataset_id;
        return outputs[a].learner_id < outputs[b].learner_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        const auto& a = outputs[order[i - 1]];
        const auto& b = outputs[order[i]];
        if (a.dataset_id == b.dataset_id && a.learner_id == b.learner_id)
            throw DataError("assemble: duplicate output for " + a.dataset_id + "/" + a.learner_id);
    }

    const LearnerOutput& ref = outputs[order[0]];
    const std::size_t V = ref.variable_names.size();
    std::set<std::string> ref_names(ref.variable_names.begin(), ref.variable_names.end());
    for (const auto& out : outputs) {
        std::set<std::string> names(out.variable_names.begin(), out.variable_names.end());
        if (names != ref_names) {
            std::vector<std::string> diff;
            std::set_symmetric_difference(names.begin(), names.end(), ref_names.begin(),
                                          ref_names.end(), std::back_inserter(diff));
            std::string msg = "assemble: variable-name mismatch, symmetric difference:";
            for (std::size_t i = 0; i < diff.size() && i < 8; ++i) msg += " " + diff[i];
            if (diff.size() > 8) msg += " ... (" + std::to_string(diff.size()) + " total)";
            throw DataError(msg);
        }
        if (out.phi.size() != V || out.causal_call.size() != V)
            throw DataError("assemble: output vectors misaligned with variable names");
    }
    if (labels.labels.size() != V) throw DataError("assemble: labels length mismatch");

    Level1Dataset l1;
    l1.variable_names = ref.variable_names;
    l1.labels = labels;
    l1.D1 = Matrix(V, outputs.size());

    for (std::size_t col = 0; col < order.size(); ++col) {
        const LearnerOutput& out = outputs[order[col]];
        l1.feature_names.push_back(out.dataset_id + "/" + out.learner_id);
        // align rows by variable name
        std::map<std::string, std::size_t> pos;
        for (std::size_t v = 0; v < out.variable_names.size(); ++v)
            pos[out.variable_names[v]] = v;
        for (std::size_t v = 0; v < V; ++v) {
            const std::size_t src = pos[l1.variable_names[v]];
            double value = out.phi[src];
            if (zero_noncausal && out.causal_call[src] == 0) value = 0.0;
            l1.D1.at(v, col) = value;
        }
    }
    if (!l1.D1.all_finite()) throw DataError("assemble: non-finite level-1 entry");
    return l1;
}

Level1Dataset split_variables(Level1Dataset l1, double train_fraction, std::uint64_t seed) {
    stratified_split(l1.labels.labels, train_fraction, seed, l1.train_rows, l1.test_rows);
    l1.has_split = true;
    return l1;
}

}  // namespace cdstack
