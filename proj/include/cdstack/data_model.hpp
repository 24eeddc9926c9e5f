#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdstack/matrix.hpp"

namespace cdstack {

// Samples-by-variables matrix with a per-sample binary outcome. Immutable
// after construction; safe to share across workers.
struct Level0Dataset {
    std::string dataset_id;
    Matrix X;  // J samples x V variables
    std::vector<int> y0;
    std::vector<std::string> variable_names;
    std::vector<std::string> sample_ids;

    std::size_t n_samples() const { return X.rows(); }
    std::size_t n_variables() const { return X.cols(); }

    void validate() const;  // throws DataError on any broken invariant

    Level0Dataset subset_rows(const std::vector<std::size_t>& rows) const;
};

// Binary labels over variables: 1 = known cause. In simulation mode the
// labels reveal masked_fraction of the true causes.
struct KnownCauseLabels {
    std::vector<int> labels;
    double masked_fraction = 1.0;
};

struct ColumnSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    double train_fraction = 0.67;
};

// CSV ingestion: samples as rows, variables as columns, one named binary
// outcome column. A column literally named "sample_id" provides row ids.
Level0Dataset load_level0_csv(const std::filesystem::path& path, const std::string& outcome_column,
                              const std::string& dataset_id = "");

// Stratified by outcome so both splits contain both classes.
ColumnSplit split_samples(const Level0Dataset& ds, double train_fraction, std::uint64_t seed);

// Reveals ceil(proportion * #positives) of the true causes, chosen uniformly.
KnownCauseLabels mask_known_causes(const std::vector<int>& truth, double proportion,
                                   std::uint64_t seed);

// Shared helper: stratified index split over any binary label vector.
// Guarantees both classes appear on both sides (throws DataError otherwise).
void stratified_split(const std::vector<int>& labels, double train_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train_out, std::vector<std::size_t>& test_out);

}  // namespace cdstack
