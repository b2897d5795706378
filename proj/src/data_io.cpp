#include "stec/data_io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace stec {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool parse_number(const std::string& text, double& out) {
    const char* begin = text.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\r' || *end == '\t') ++end;
    return *end == '\0';
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

RawSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TensorError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw TensorError("load_csv: empty file " + path);
    auto header = split_line(line);
    if (header.empty()) throw TensorError("load_csv: empty header in " + path);
    for (auto& h : header) h = trim(h);

    RawSeries series;
    std::vector<std::vector<std::string>> raw_rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        raw_rows.push_back(split_line(line));
    }
    if (raw_rows.size() < 2) throw TensorError("load_csv: fewer than 2 data rows in " + path);

    // First column is a timestamp iff its first value does not parse as a number.
    double probe;
    bool has_timestamp = !parse_number(trim(raw_rows[0][0]), probe);
    std::size_t first_col = has_timestamp ? 1 : 0;
    series.cols = static_cast<std::int64_t>(header.size() - first_col);
    if (series.cols < 1) throw TensorError("load_csv: no numeric columns in " + path);
    series.column_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first_col),
                               header.end());

    for (std::size_t r = 0; r < raw_rows.size(); ++r) {
        const auto& cells = raw_rows[r];
        if (cells.size() != header.size())
            throw TensorError("load_csv: row " + std::to_string(r + 2) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(header.size()));
        if (has_timestamp) series.timestamps.push_back(trim(cells[0]));
        for (std::size_t c = first_col; c < cells.size(); ++c) {
            auto text = trim(cells[c]);
            double value;
            if (text.empty() || !parse_number(text, value))
                throw TensorError("load_csv: unparseable cell '" + text + "' at row " +
                                  std::to_string(r + 2) + ", column '" +
                                  header[c] + "'");
            series.values.push_back(value);
        }
    }
    series.rows = static_cast<std::int64_t>(raw_rows.size());
    return series;
}

namespace {

RawSeries slice_series(const RawSeries& s, std::int64_t begin, std::int64_t end) {
    RawSeries out;
    out.column_names = s.column_names;
    out.cols = s.cols;
    out.rows = end - begin;
    out.values.assign(s.values.begin() + begin * s.cols, s.values.begin() + end * s.cols);
    if (!s.timestamps.empty())
        out.timestamps.assign(s.timestamps.begin() + begin, s.timestamps.begin() + end);
    return out;
}

}  // namespace

SplitSeries split_712(const RawSeries& series) {
    std::int64_t n = series.rows;
    auto n_train = static_cast<std::int64_t>(std::floor(0.7 * static_cast<double>(n)));
    auto n_val = static_cast<std::int64_t>(std::floor(0.1 * static_cast<double>(n)));
    return SplitSeries{slice_series(series, 0, n_train),
                       slice_series(series, n_train, n_train + n_val),
                       slice_series(series, n_train + n_val, n)};
}

NormStats compute_stats(const RawSeries& train) {
    NormStats stats;
    stats.mean.assign(static_cast<std::size_t>(train.cols), 0.0);
    stats.std_dev.assign(static_cast<std::size_t>(train.cols), 0.0);
    for (std::int64_t r = 0; r < train.rows; ++r)
        for (std::int64_t c = 0; c < train.cols; ++c)
            stats.mean[static_cast<std::size_t>(c)] += train.at(r, c);
    for (auto& m : stats.mean) m /= static_cast<double>(train.rows);
    for (std::int64_t r = 0; r < train.rows; ++r)
        for (std::int64_t c = 0; c < train.cols; ++c) {
            double d = train.at(r, c) - stats.mean[static_cast<std::size_t>(c)];
            stats.std_dev[static_cast<std::size_t>(c)] += d * d;
        }
    for (std::size_t c = 0; c < stats.std_dev.size(); ++c) {
        stats.std_dev[c] = std::sqrt(stats.std_dev[c] / static_cast<double>(train.rows));
        if (stats.std_dev[c] <= 0.0)
            throw TensorError("compute_stats: constant column '" +
                              train.column_names[c] + "'");
    }
    return stats;
}

RawSeries apply_normalization(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    for (std::int64_t r = 0; r < out.rows; ++r)
        for (std::int64_t c = 0; c < out.cols; ++c)
            out.values[static_cast<std::size_t>(r * out.cols + c)] =
                (series.at(r, c) - stats.mean[static_cast<std::size_t>(c)]) /
                stats.std_dev[static_cast<std::size_t>(c)];
    return out;
}

RawSeries invert_normalization(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    for (std::int64_t r = 0; r < out.rows; ++r)
        for (std::int64_t c = 0; c < out.cols; ++c)
            out.values[static_cast<std::size_t>(r * out.cols + c)] =
                series.at(r, c) * stats.std_dev[static_cast<std::size_t>(c)] +
                stats.mean[static_cast<std::size_t>(c)];
    return out;
}

std::vector<WindowSample> windows(const RawSeries& split, std::int64_t t_in,
                                  std::int64_t t_pred, std::int64_t stride) {
    if (split.rows < t_in + t_pred)
        throw TensorError("windows: split shorter than T_in + T_pred");
    if (stride < 1) throw TensorError("windows: stride must be >= 1");
    std::vector<WindowSample> out;
    for (std::int64_t start = 0; start + t_in + t_pred <= split.rows; start += stride) {
        WindowSample w;
        w.start = start;
        w.input = make_tensor(
            {t_in, split.cols},
            std::vector<double>(split.values.begin() + start * split.cols,
                                split.values.begin() + (start + t_in) * split.cols));
        w.target = make_tensor(
            {t_pred, split.cols},
            std::vector<double>(
                split.values.begin() + (start + t_in) * split.cols,
                split.values.begin() + (start + t_in + t_pred) * split.cols));
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<TrainSample> as_train_samples(const std::vector<WindowSample>& w) {
    std::vector<TrainSample> out;
    out.reserve(w.size());
    for (const auto& s : w) out.push_back(TrainSample{s.input, s.target});
    return out;
}

SynthResult synth_dataset(const SynthSpec& spec) {
    std::int64_t V = spec.V, n = spec.length;
    if (V < 1 || n < 2) throw TensorError("synth_dataset: invalid V or length");
    auto wanted = [&](const std::vector<double>& v, const char* what) {
        if (!v.empty() && static_cast<std::int64_t>(v.size()) != V)
            throw TensorError(std::string("synth_dataset: ") + what + " must have V entries");
    };
    wanted(spec.periods, "periods");
    wanted(spec.amplitudes, "amplitudes");
    wanted(spec.phases, "phases");
    wanted(spec.noise, "noise");
    if (!spec.mixing.empty() && static_cast<std::int64_t>(spec.mixing.size()) != V * V)
        throw TensorError("synth_dataset: mixing must be V x V");

    std::vector<double> mixing = spec.mixing;
    if (mixing.empty()) {
        mixing.assign(static_cast<std::size_t>(V * V), 0.0);
        for (std::int64_t i = 0; i < V; ++i) mixing[static_cast<std::size_t>(i * V + i)] = 1.0;
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SynthResult result;
    result.mixing = mixing;
    auto& s = result.series;
    s.cols = V;
    s.rows = n;
    for (std::int64_t v = 0; v < V; ++v) s.column_names.push_back("var" + std::to_string(v));
    s.values.assign(static_cast<std::size_t>(n * V), 0.0);

    std::vector<double> latent(static_cast<std::size_t>(V));
    for (std::int64_t t = 0; t < n; ++t) {
        for (std::int64_t v = 0; v < V; ++v) {
            double period = spec.periods.empty() ? 24.0 + 8.0 * static_cast<double>(v)
                                                 : spec.periods[static_cast<std::size_t>(v)];
            double amp = spec.amplitudes.empty() ? 1.0
                                                 : spec.amplitudes[static_cast<std::size_t>(v)];
            double phase = spec.phases.empty()
                               ? 2.0 * M_PI * static_cast<double>(v) / static_cast<double>(V)
                               : spec.phases[static_cast<std::size_t>(v)];
            latent[static_cast<std::size_t>(v)] =
                amp * std::sin(2.0 * M_PI * static_cast<double>(t) / period + phase);
        }
        for (std::int64_t v = 0; v < V; ++v) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < V; ++j)
                acc += mixing[static_cast<std::size_t>(v * V + j)] *
                       latent[static_cast<std::size_t>(j)];
            double sigma = spec.noise.empty() ? 0.0 : spec.noise[static_cast<std::size_t>(v)];
            if (sigma > 0.0) acc += sigma * gauss(rng);
            s.values[static_cast<std::size_t>(t * V + v)] = acc;
        }
    }
    return result;
}

SynthSpec parse_synth_spec(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    SynthSpec spec;
    spec.V = j.value("V", spec.V);
    spec.length = j.value("length", spec.length);
    spec.seed = j.value("seed", spec.seed);
    auto vec = [&](const char* key) {
        return j.contains(key) ? j[key].get<std::vector<double>>() : std::vector<double>{};
    };
    spec.periods = vec("periods");
    spec.amplitudes = vec("amplitudes");
    spec.phases = vec("phases");
    spec.noise = vec("noise");
    if (j.contains("mixing")) {
        for (const auto& row : j["mixing"])
            for (const auto& cell : row) spec.mixing.push_back(cell.get<double>());
    }
    return spec;
}

void write_csv(const std::string& path, const RawSeries& series) {
    std::ofstream out(path);
    if (!out) throw TensorError("write_csv: cannot open " + path);
    bool ts = !series.timestamps.empty();
    if (ts) out << "date,";
    for (std::int64_t c = 0; c < series.cols; ++c) {
        if (c) out << ",";
        out << series.column_names[static_cast<std::size_t>(c)];
    }
    out << "\n";
    out.precision(17);
    for (std::int64_t r = 0; r < series.rows; ++r) {
        if (ts) out << series.timestamps[static_cast<std::size_t>(r)] << ",";
        for (std::int64_t c = 0; c < series.cols; ++c) {
            if (c) out << ",";
            out << series.at(r, c);
        }
        out << "\n";
    }
}

}  // namespace stec
