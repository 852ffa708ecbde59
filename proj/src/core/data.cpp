#include "data.hpp"

#include "error.hpp"
#include "serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fvbnn {

// ---------------------------------------------------------------- Dataset

void Dataset::validate() const {
    const std::size_t n = size();
    if (ids.size() != n || static_cast<std::size_t>(features.rows()) != n) {
        throw DataError("dataset: ids, features and labels disagree on the row count");
    }
    for (const auto& [name, col] : aux) {
        if (col.size() != n) throw DataError("dataset: aux column '" + name + "' has wrong length");
    }
    if (!groups.empty() && groups.size() != n) throw DataError("dataset: group column has wrong length");
    if (!labels.allFinite()) throw DataError("dataset: non-finite label");
    if (!features.allFinite()) throw DataError("dataset: non-finite feature");
    if (!sequences.empty()) {
        if (sequences.size() != n) throw DataError("dataset: sequence column has wrong length");
        for (std::size_t i = 0; i < n; ++i) {
            if (sequences[i].size() != sequences[0].size()) {
                throw DataError("dataset: sequence at row " + std::to_string(i + 1) + " has a different length");
            }
            for (char c : sequences[i]) {
                if (alphabet.find(c) == std::string::npos) {
                    throw DataError("dataset: character '" + std::string(1, c) + "' at row " +
                                    std::to_string(i + 1) + " not in alphabet");
                }
            }
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    std::vector<Eigen::Index> idx;
    idx.reserve(rows.size());
    for (auto r : rows) {
        if (r >= size()) throw InputError("dataset subset: row " + std::to_string(r) + " out of range");
        idx.push_back(static_cast<Eigen::Index>(r));
        out.ids.push_back(ids[r]);
        if (!sequences.empty()) out.sequences.push_back(sequences[r]);
        if (!groups.empty()) out.groups.push_back(groups[r]);
    }
    out.features = features(idx, Eigen::all);
    out.labels = labels(idx);
    for (const auto& [name, col] : aux) {
        auto& dst = out.aux[name];
        for (auto r : rows) dst.push_back(col[r]);
    }
    out.alphabet = alphabet;
    return out;
}

std::size_t Dataset::row_of(std::string_view id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return i;
    }
    throw DataError("dataset: no row with id '" + std::string(id) + "'");
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name, const std::string& role) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("CSV is missing " + role + " column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

CsvTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw DataError(path.string() + ": missing header row");
    return table;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
    std::string_view s = text;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    double value = 0.0;
    const char* begin = s.data();
    if (!s.empty() && s.front() == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("row " + std::to_string(row) + ": cannot parse '" + text + "' in column '" +
                        column + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw DataError("row " + std::to_string(row) + ": non-finite value '" + text + "' in column '" +
                        column + "'");
    }
    return value;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    const CsvTable table = read_table(path);
    if (!schema.sequence_column.empty() && !schema.feature_columns.empty()) {
        throw ConfigError("schema: use either a sequence column or feature columns, not both");
    }
    const auto id_col = table.column(schema.id_column, "id");
    const auto label_col = table.column(schema.label_column, "label");
    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.feature_columns) feature_cols.push_back(table.column(f, "feature"));
    std::vector<std::size_t> aux_cols;
    for (const auto& a : schema.aux_columns) aux_cols.push_back(table.column(a, "aux"));
    std::optional<std::size_t> seq_col;
    if (!schema.sequence_column.empty()) seq_col = table.column(schema.sequence_column, "sequence");
    std::optional<std::size_t> group_col;
    if (!schema.group_column.empty()) group_col = table.column(schema.group_column, "group");

    const std::size_t n = table.rows.size();
    Dataset data;
    data.labels.resize(static_cast<Eigen::Index>(n));
    if (!seq_col) data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        const auto r = static_cast<Eigen::Index>(i);
        data.ids.push_back(row[id_col]);
        data.labels[r] = parse_number(row[label_col], i + 1, schema.label_column);
        for (std::size_t j = 0; j < feature_cols.size(); ++j) {
            data.features(r, static_cast<Eigen::Index>(j)) =
                parse_number(row[feature_cols[j]], i + 1, schema.feature_columns[j]);
        }
        for (std::size_t j = 0; j < aux_cols.size(); ++j) {
            data.aux[schema.aux_columns[j]].push_back(parse_number(row[aux_cols[j]], i + 1, schema.aux_columns[j]));
        }
        if (seq_col) data.sequences.push_back(row[*seq_col]);
        if (group_col) data.groups.push_back(row[*group_col]);
    }
    for (const auto& a : schema.aux_columns) data.aux[a];  // present even when n == 0
    if (seq_col) {
        if (schema.alphabet.empty()) throw ConfigError("schema: a sequence column needs an alphabet");
        data.alphabet = schema.alphabet;
        data.features = one_hot_encode(data.sequences, schema.alphabet);
    }
    data.validate();
    return data;
}

std::vector<std::string> read_csv_column(const std::filesystem::path& path, const std::string& column) {
    const CsvTable table = read_table(path);
    const auto c = table.column(column, "requested");
    std::vector<std::string> out;
    for (const auto& row : table.rows) out.push_back(row[c]);
    return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const CsvSchema& schema) {
    std::ostringstream out;
    std::vector<std::string> header{schema.id_column, schema.label_column};
    const bool write_features = schema.sequence_column.empty();
    if (write_features && schema.feature_columns.size() != data.feature_dim()) {
        throw InputError("write_csv: schema names " + std::to_string(schema.feature_columns.size()) +
                         " feature columns, dataset has " + std::to_string(data.feature_dim()));
    }
    if (write_features) header.insert(header.end(), schema.feature_columns.begin(), schema.feature_columns.end());
    if (!write_features) header.push_back(schema.sequence_column);
    header.insert(header.end(), schema.aux_columns.begin(), schema.aux_columns.end());
    if (!schema.group_column.empty()) header.push_back(schema.group_column);
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << quote_if_needed(header[j]);
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << quote_if_needed(data.ids[i]) << ',' << format_double(data.labels[r]);
        if (write_features) {
            for (Eigen::Index j = 0; j < data.features.cols(); ++j) out << ',' << format_double(data.features(r, j));
        } else {
            out << ',' << data.sequences.at(i);
        }
        for (const auto& a : schema.aux_columns) {
            auto it = data.aux.find(a);
            if (it == data.aux.end()) throw InputError("write_csv: dataset has no aux column '" + a + "'");
            out << ',' << format_double(it->second[i]);
        }
        if (!schema.group_column.empty()) out << ',' << quote_if_needed(data.groups.at(i));
        out << '\n';
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------- encodings

Eigen::MatrixXd one_hot_encode(std::span<const std::string> sequences, std::string_view alphabet) {
    if (alphabet.empty()) throw InputError("one_hot_encode: empty alphabet");
    const std::size_t L = sequences.empty() ? 0 : sequences[0].size();
    const std::size_t A = alphabet.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sequences.size()),
                                                static_cast<Eigen::Index>(L * A));
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        if (sequences[i].size() != L) {
            throw DataError("one_hot_encode: sequence " + std::to_string(i + 1) + " has length " +
                            std::to_string(sequences[i].size()) + ", expected " + std::to_string(L));
        }
        for (std::size_t p = 0; p < L; ++p) {
            const auto a = alphabet.find(sequences[i][p]);
            if (a == std::string_view::npos) {
                throw DataError("one_hot_encode: unknown character '" + std::string(1, sequences[i][p]) +
                                "' in sequence " + std::to_string(i + 1) + " at position " +
                                std::to_string(p + 1));
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p * A + a)) = 1.0;
        }
    }
    return out;
}

std::vector<std::string> one_hot_decode(const Eigen::MatrixXd& encoded, std::string_view alphabet) {
    const auto A = static_cast<Eigen::Index>(alphabet.size());
    if (A == 0 || encoded.cols() % A != 0) throw InputError("one_hot_decode: width not a multiple of the alphabet");
    const Eigen::Index L = encoded.cols() / A;
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
        std::string s;
        for (Eigen::Index p = 0; p < L; ++p) {
            Eigen::Index hot = 0;
            encoded.row(i).segment(p * A, A).maxCoeff(&hot);
            s.push_back(alphabet[static_cast<std::size_t>(hot)]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t hamming_distance(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) throw InputError("hamming_distance: sequences differ in length");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i] ? 1 : 0;
    return d;
}

// ---------------------------------------------------------------- splits

bool is_partition(const Split& split, std::size_t n) {
    std::vector<int> hits(n, 0);
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (auto r : *part) {
            if (r >= n || hits[r]++ != 0) return false;
        }
    }
    return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

std::vector<std::size_t> balanced_sample(const Dataset& data, double fitness_threshold,
                                         std::span<const std::size_t> within, std::size_t n_sample,
                                         std::uint64_t seed) {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> unfit;
    for (auto r : within) {
        if (r >= data.size()) throw InputError("balanced_sample: row out of range");
        (data.labels[static_cast<Eigen::Index>(r)] > fitness_threshold ? fit : unfit).push_back(r);
    }
    const std::size_t want_fit = (n_sample + 1) / 2;
    const std::size_t want_unfit = n_sample / 2;
    if (fit.size() < want_fit || unfit.size() < want_unfit) {
        throw DataError("balanced_sample: class exhausted (need " + std::to_string(want_fit) + " fit / " +
                        std::to_string(want_unfit) + " unfit, have " + std::to_string(fit.size()) +
                        " / " + std::to_string(unfit.size()) + ")");
    }
    std::mt19937_64 rng(seed);
    std::shuffle(fit.begin(), fit.end(), rng);
    std::shuffle(unfit.begin(), unfit.end(), rng);
    std::vector<std::size_t> out(fit.begin(), fit.begin() + static_cast<std::ptrdiff_t>(want_fit));
    out.insert(out.end(), unfit.begin(), unfit.begin() + static_cast<std::ptrdiff_t>(want_unfit));
    std::sort(out.begin(), out.end());
    return out;
}

Split hamming_radius_split(const Dataset& data, const HammingSplitSpec& spec) {
    if (!data.has_sequences()) throw DataError("hamming_radius_split: dataset has no sequences");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
        throw ConfigError("hamming_radius_split: train_fraction must be in (0, 1]");
    }
    const std::string& wt = data.sequences[data.row_of(spec.wildtype_id)];
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (hamming_distance(data.sequences[i], wt) <= spec.radius) pool.push_back(i);
    }
    if (pool.size() < spec.n_sample) {
        throw DataError("hamming_radius_split: only " + std::to_string(pool.size()) + " rows within radius " +
                        std::to_string(spec.radius) + ", need " + std::to_string(spec.n_sample));
    }
    std::mt19937_64 rng(spec.seed);
    std::vector<std::size_t> sample;
    if (spec.balance_threshold) {
        sample = balanced_sample(data, *spec.balance_threshold, pool, spec.n_sample, spec.seed);
    } else {
        sample = pool;
        std::shuffle(sample.begin(), sample.end(), rng);
        sample.resize(spec.n_sample);
    }
    std::shuffle(sample.begin(), sample.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(sample.size())));

    Split split;
    split.train.assign(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(sample.begin() + static_cast<std::ptrdiff_t>(n_train), sample.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::vector<char> taken(data.size(), 0);
    for (auto r : sample) taken[r] = 1;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!taken[i]) split.test.push_back(i);
    }
    return split;
}

Split fraction_split(const Dataset& data, const FractionSplitSpec& spec) {
    auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
    if (!in_unit(spec.train_fraction) || !in_unit(spec.val_fraction_of_train)) {
        throw ConfigError("fraction_split: fractions must lie in (0, 1)");
    }
    if (spec.by_group && data.groups.empty()) throw DataError("fraction_split: dataset has no group column");

    // Units are rows, or groups in order of first appearance.
    std::vector<std::vector<std::size_t>> units;
    if (spec.by_group) {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto [it, inserted] = index.try_emplace(data.groups[i], units.size());
            if (inserted) units.emplace_back();
            units[it->second].push_back(i);
        }
    } else {
        for (std::size_t i = 0; i < data.size(); ++i) units.push_back({i});
    }
    std::mt19937_64 rng(spec.seed);
    std::shuffle(units.begin(), units.end(), rng);

    const auto n = static_cast<double>(data.size());
    const auto target_trainval = static_cast<std::size_t>(std::lround(spec.train_fraction * n));
    std::size_t u = 0;
    std::size_t trainval_rows = 0;
    while (u < units.size() && trainval_rows < target_trainval) trainval_rows += units[u++].size();
    const std::size_t trainval_units = u;
    const auto target_val =
        static_cast<std::size_t>(std::lround(spec.val_fraction_of_train * static_cast<double>(trainval_rows)));

    Split split;
    std::size_t val_rows = 0;
    for (std::size_t k = 0; k < units.size(); ++k) {
        std::vector<std::size_t>* dst = &split.test;
        if (k < trainval_units) {
            if (val_rows < target_val) {
                dst = &split.val;
                val_rows += units[k].size();
            } else {
                dst = &split.train;
            }
        }
        dst->insert(dst->end(), units[k].begin(), units[k].end());
    }
    if (split.train.empty() || split.val.empty() || split.test.empty()) {
        throw DataError("fraction_split: a partition came out empty");
    }
    for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
    return split;
}

Split precomputed_split(std::span<const std::string> tags) {
    Split split;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == "train") {
            split.train.push_back(i);
        } else if (tags[i] == "val" || tags[i] == "valid" || tags[i] == "validation") {
            split.val.push_back(i);
        } else if (tags[i] == "test") {
            split.test.push_back(i);
        } else {
            throw DataError("row " + std::to_string(i + 1) + ": unknown split tag '" + tags[i] + "'");
        }
    }
    return split;
}

// ---------------------------------------------------------------- generators

double synthetic_1d_truth(double x) {
    using std::numbers::pi;
    return 0.3 * std::sin(pi * x / 2.0) + 0.4 * std::sin(pi * x);
}

Synthetic1d generate_synthetic_1d(const Synthetic1dSpec& spec) {
    if (spec.n < 2) throw InputError("generate_synthetic_1d: n must be >= 2");
    if (!(spec.x_max > spec.x_min)) throw InputError("generate_synthetic_1d: degenerate x range");
    if (!(spec.noise_sd >= 0.0)) throw InputError("generate_synthetic_1d: noise_sd must be >= 0");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> ux(spec.x_min, spec.x_max);
    std::normal_distribution<double> noise(0.0, 1.0);

    Synthetic1d out;
    auto& d = out.data;
    d.features.resize(static_cast<Eigen::Index>(spec.n), 1);
    d.labels.resize(static_cast<Eigen::Index>(spec.n));
    for (std::size_t i = 0; i < spec.n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double x = ux(rng);
        d.features(r, 0) = x;
        d.labels[r] = synthetic_1d_truth(x) + spec.noise_sd * noise(rng);
        char id[32];
        std::snprintf(id, sizeof id, "p%05zu", i);
        d.ids.emplace_back(id);
    }
    const auto n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * static_cast<double>(spec.n)));
    for (std::size_t i = 0; i < spec.n; ++i) (i < n_train ? out.split.train : out.split.val).push_back(i);
    return out;
}

Dataset generate_landscape(const LandscapeSpec& spec) {
    const std::size_t L = spec.length;
    const std::size_t A = spec.alphabet.size();
    if (L == 0 || A < 2) throw InputError("generate_landscape: need length >= 1 and >= 2 letters");
    std::size_t total = 1;
    for (std::size_t p = 0; p < L; ++p) {
        total *= A;
        if (total > 2'000'000) throw InputError("generate_landscape: too many sequences");
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Per-site, per-letter effects; letter 0 is the wild type.
    std::vector<double> destabilize(L * A, 0.0);
    std::vector<double> activity(L * A, 0.0);
    for (std::size_t p = 0; p < L; ++p) {
        for (std::size_t a = 1; a < A; ++a) {
            destabilize[p * A + a] = std::abs(0.6 + 0.5 * normal(rng));
            activity[p * A + a] = 0.25 * normal(rng);
        }
    }
    constexpr double stability_margin = 1.3;  // roughly two tolerated mutations
    constexpr double temperature = 0.25;

    Dataset d;
    d.alphabet = spec.alphabet;
    d.labels.resize(static_cast<Eigen::Index>(total));
    auto& proxy = d.aux["stability"];
    std::vector<std::size_t> letters(L, 0);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t code = i;
        std::string seq(L, ' ');
        double energy = 0.0;
        double log_activity = 0.0;
        for (std::size_t p = L; p-- > 0;) {
            const std::size_t a = code % A;
            code /= A;
            seq[p] = spec.alphabet[a];
            energy += destabilize[p * A + a];
            log_activity += activity[p * A + a];
        }
        const double folded = 1.0 / (1.0 + std::exp((energy - stability_margin) / temperature));
        const double fitness = folded * std::exp(log_activity);
        d.labels[static_cast<Eigen::Index>(i)] = fitness + spec.noise_sd * normal(rng);
        proxy.push_back(energy + spec.proxy_noise_sd * normal(rng));
        d.ids.push_back("v" + std::to_string(i));
        d.sequences.push_back(std::move(seq));
    }
    d.features = one_hot_encode(d.sequences, d.alphabet);
    return d;
}

}  // namespace fvbnn
