#include "netsep/forecast.hpp"

#include <string>

namespace netsep {

MixingHistory::MixingHistory(int dim, std::int64_t tau) : dim_(dim), tau_(tau) {
    if (dim < 1) throw DataError("mixing history needs at least one source");
    if (tau < 1) throw DataError("period tau must be positive");
}

MixingHistory MixingHistory::from_mixing_matrix(const Mat& w, std::int64_t tau,
                                                std::int64_t first_window) {
    MixingHistory hist(static_cast<int>(w.cols()), tau);
    for (Eigen::Index t = 0; t < w.rows(); ++t) {
        hist.append(first_window + t, w.row(t));
    }
    return hist;
}

std::int64_t MixingHistory::last_window() const {
    if (windows_.empty()) throw DataError("empty mixing history");
    return windows_.back();
}

void MixingHistory::append(std::int64_t window, RowVec w) {
    if (!windows_.empty() && window <= windows_.back()) {
        throw DataError("mixing history append out of order: window " + std::to_string(window) +
                        " after " + std::to_string(windows_.back()));
    }
    if (w.size() != dim_) throw DataError("mixing vector has wrong length");
    if (!w.allFinite() || w.minCoeff() < 0.0) {
        throw DataError("mixing vector must be finite and nonnegative");
    }
    windows_.push_back(window);
    rows_.push_back(std::move(w));
}

RowVec MixingHistory::predict(std::int64_t window) const {
    if (windows_.empty()) throw DataError("cannot predict from an empty mixing history");
    if (window <= windows_.back()) {
        throw DataError("prediction window must exceed every stored window");
    }
    RowVec sum = RowVec::Zero(dim_);
    std::int64_t matched = 0;
    for (std::size_t i = 0; i < windows_.size(); ++i) {
        if ((window - windows_[i]) % tau_ == 0) {
            sum += rows_[i];
            ++matched;
        }
    }
    if (matched > 0) return sum / static_cast<double>(matched);
    // No stored window shares the phase: fall back to the overall mean.
    for (const auto& r : rows_) sum += r;
    return sum / static_cast<double>(rows_.size());
}

}  // namespace netsep
