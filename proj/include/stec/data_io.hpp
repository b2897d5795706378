#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stec/tensor.hpp"
#include "stec/training.hpp"

namespace stec {

// Column-named numeric matrix in chronological order; ingestion rejects rows
// with missing or unparseable cells rather than imputing.
struct RawSeries {
    std::vector<std::string> timestamps;  // empty when the file has none
    std::vector<std::string> column_names;
    std::vector<double> values;  // row-major [rows, V]
    std::int64_t rows = 0;
    std::int64_t cols = 0;

    double at(std::int64_t r, std::int64_t c) const {
        return values[static_cast<std::size_t>(r * cols + c)];
    }
};

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

struct SplitSeries {
    RawSeries train, val, test;
};

RawSeries load_csv(const std::string& path);

// Chronological 7:1:2 split: floor(0.7 n), floor(0.1 n), remainder.
SplitSeries split_712(const RawSeries& series);

// Per-column z-score statistics from the training split only.
NormStats compute_stats(const RawSeries& train);
RawSeries apply_normalization(const RawSeries& series, const NormStats& stats);
RawSeries invert_normalization(const RawSeries& series, const NormStats& stats);

struct WindowSample {
    TensorPtr input;   // [T_in, V]
    TensorPtr target;  // [T_pred, V]
    std::int64_t start;
};

std::vector<WindowSample> windows(const RawSeries& split, std::int64_t t_in,
                                  std::int64_t t_pred, std::int64_t stride = 1);

std::vector<TrainSample> as_train_samples(const std::vector<WindowSample>& w);

// Seeded synthetic generator: V latent sinusoids (period/amplitude/phase per
// variable) mixed by a V x V matrix, plus Gaussian noise. The mixing matrix
// is retained so graph-recovery diagnostics have ground truth.
struct SynthSpec {
    std::int64_t V = 8;
    std::int64_t length = 4000;
    std::uint64_t seed = 1;
    std::vector<double> periods;     // per variable
    std::vector<double> amplitudes;  // per variable
    std::vector<double> phases;      // per variable, defaults spread over [0, 2pi)
    std::vector<double> noise;       // per variable std dev
    std::vector<double> mixing;      // row-major [V, V]; empty means identity
};

struct SynthResult {
    RawSeries series;
    std::vector<double> mixing;  // ground truth, row-major [V, V]
};

SynthResult synth_dataset(const SynthSpec& spec);

SynthSpec parse_synth_spec(const std::string& json_text);
void write_csv(const std::string& path, const RawSeries& series);

}  // namespace stec
