#include "cdstack/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cdstack/csv.hpp"
#include "cdstack/errors.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

void Level0Dataset::validate() const {
    if (X.rows() != y0.size()) throw DataError(dataset_id + ": rows(X) != len(y0)");
    if (X.cols() != variable_names.size())
        throw DataError(dataset_id + ": cols(X) != len(variable_names)");
    if (!sample_ids.empty() && sample_ids.size() != X.rows())
        throw DataError(dataset_id + ": sample_ids length mismatch");
    if (!X.all_finite()) throw DataError(dataset_id + ": non-finite entry in X");
    bool has0 = false, has1 = false;
    for (int y : y0) {
        if (y == 0) has0 = true;
        else if (y == 1) has1 = true;
        else throw DataError(dataset_id + ": outcome value not in {0,1}");
    }
    if (!has0 || !has1) throw DataError(dataset_id + ": single-class outcome");
    std::set<std::string> names(variable_names.begin(), variable_names.end());
    if (names.size() != variable_names.size())
        throw DataError(dataset_id + ": duplicate variable names");
}

Level0Dataset Level0Dataset::subset_rows(const std::vector<std::size_t>& rows) const {
    Level0Dataset out;
    out.dataset_id = dataset_id;
    out.variable_names = variable_names;
    out.X = Matrix(rows.size(), X.cols());
    out.y0.resize(rows.size());
    out.sample_ids.reserve(sample_ids.empty() ? 0 : rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        std::copy(X.row(r), X.row(r) + X.cols(), out.X.row(i));
        out.y0[i] = y0[r];
        if (!sample_ids.empty()) out.sample_ids.push_back(sample_ids[r]);
    }
    return out;
}

Level0Dataset load_level0_csv(const std::filesystem::path& path, const std::string& outcome_column,
                              const std::string& dataset_id) {
    const CsvTable t = read_csv(path);
    const std::size_t y_col = t.column_index(outcome_column);
    if (y_col == CsvTable::npos)
        throw DataError(path.string() + ": outcome column '" + outcome_column + "' not found");
    const std::size_t id_col = t.column_index("sample_id");

    Level0Dataset ds;
    ds.dataset_id = dataset_id.empty() ? path.stem().string() : dataset_id;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (j == y_col || j == id_col) continue;
        ds.variable_names.push_back(t.header[j]);
    }
    const std::size_t J = t.rows.size();
    const std::size_t V = ds.variable_names.size();
    if (J == 0) throw DataError(path.string() + ": no data rows");
    if (V == 0) throw DataError(path.string() + ": no variable columns");

    ds.X = Matrix(J, V);
    ds.y0.resize(J);
    for (std::size_t i = 0; i < J; ++i) {
        const auto& row = t.rows[i];
        std::size_t v = 0;
        for (std::size_t j = 0; j < t.header.size(); ++j) {
            if (j == id_col) continue;
            const double val = parse_cell(row[j], i + 2, t.header[j]);  // +2: 1-based, after header
            if (j == y_col) {
                if (val != 0.0 && val != 1.0)
                    throw DataError(path.string() + ": outcome not binary at row " +
                                    std::to_string(i + 2));
                ds.y0[i] = static_cast<int>(val);
            } else {
                ds.X.at(i, v++) = val;
            }
        }
        if (id_col != CsvTable::npos) ds.sample_ids.push_back(row[id_col]);
    }
    if (ds.sample_ids.empty()) {
        for (std::size_t i = 0; i < J; ++i) ds.sample_ids.push_back("row_" + std::to_string(i + 1));
    }
    ds.validate();
    return ds;
}

void stratified_split(const std::vector<int>& labels, double train_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train_out, std::vector<std::size_t>& test_out) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0,1)");
    const std::size_t n = labels.size();
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.size() < 2 || neg.size() < 2)
        throw DataError("too few samples of a class to stratify (need >=2 per class)");

    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);

    const std::size_t target_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    // per-class floor quota, remainder to the class with the larger fractional part
    const double qp = train_fraction * static_cast<double>(pos.size());
    const double qn = train_fraction * static_cast<double>(neg.size());
    std::size_t np = static_cast<std::size_t>(std::floor(qp));
    std::size_t nn = static_cast<std::size_t>(std::floor(qn));
    while (np + nn < target_train) {
        if (qp - std::floor(qp) >= qn - std::floor(qn) && np < pos.size()) ++np;
        else ++nn;
    }
    // keep at least one sample of each class on each side
    np = std::clamp<std::size_t>(np, 1, pos.size() - 1);
    nn = std::clamp<std::size_t>(nn, 1, neg.size() - 1);

    train_out.clear();
    test_out.clear();
    for (std::size_t i = 0; i < pos.size(); ++i) (i < np ? train_out : test_out).push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i) (i < nn ? train_out : test_out).push_back(neg[i]);
    std::sort(train_out.begin(), train_out.end());
    std::sort(test_out.begin(), test_out.end());
}

ColumnSplit split_samples(const Level0Dataset& ds, double train_fraction, std::uint64_t seed) {
    ColumnSplit split;
    split.train_fraction = train_fraction;
    stratified_split(ds.y0, train_fraction, seed, split.train_idx, split.test_idx);
    return split;
}

KnownCauseLabels mask_known_causes(const std::vector<int>& truth, double proportion,
                                   std::uint64_t seed) {
    if (!(proportion > 0.0 && proportion <= 1.0))
        throw ConfigError("masking proportion must be in (0,1]");
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == 1) pos.push_back(i);
    if (pos.empty()) throw DataError("mask_known_causes: truth has no positives");

    const std::size_t reveal =
        static_cast<std::size_t>(std::ceil(proportion * static_cast<double>(pos.size())));
    if (reveal == 0) throw DataError("mask_known_causes: proportion reveals zero positives");

    Rng rng(seed);
    rng.shuffle(pos);
    KnownCauseLabels out;
    out.labels.assign(truth.size(), 0);
    for (std::size_t i = 0; i < reveal && i < pos.size(); ++i) out.labels[pos[i]] = 1;
    out.masked_fraction = proportion;
    return out;
}

}  // namespace cdstack
