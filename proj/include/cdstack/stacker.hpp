#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdstack/data_model.hpp"
#include "cdstack/learners.hpp"
#include "cdstack/matrix.hpp"

namespace cdstack {

// Variables-by-features matrix assembled from learner outputs; rows are
// candidate causes, columns are dataset/learner pairs.
struct Level1Dataset {
    Matrix D1;  // V x (L*d)
    std::vector<std::string> feature_names;  // "dataset_id/learner_id", sorted
    std::vector<std::string> variable_names;
    KnownCauseLabels labels;
    std::vector<std::size_t> train_rows, test_rows;
    bool has_split = false;
};

// Joins outputs by variable name (error on any mismatch), orders columns by
// (dataset_id, learner_id), optionally zeroes entries whose learner did not
// call the variable causal.
Level1Dataset assemble(const std::vector<LearnerOutput>& outputs, const KnownCauseLabels& labels,
                       bool zero_noncausal = false);

// Stratified row split on the known-cause labels.
Level1Dataset split_variables(Level1Dataset l1, double train_fraction, std::uint64_t seed);

}  // namespace cdstack
