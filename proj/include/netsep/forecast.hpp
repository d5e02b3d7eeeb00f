#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "netsep/common.hpp"
#include "netsep/linalg.hpp"

namespace netsep {

// One week of one-hour windows.
inline constexpr std::int64_t kDefaultTau = 168;

// Ordered record of per-window mixing vectors, seeded with the trained rows
// and extended online as new windows are refitted. Single writer, consistent
// snapshot for readers.
class MixingHistory {
  public:
    MixingHistory(int dim, std::int64_t tau);

    // Rows of a trained mixing matrix become windows [first_window, first_window + rows).
    static MixingHistory from_mixing_matrix(const Mat& w, std::int64_t tau,
                                            std::int64_t first_window = 0);

    int dim() const { return dim_; }
    std::int64_t tau() const { return tau_; }
    std::size_t size() const { return windows_.size(); }
    bool empty() const { return windows_.empty(); }
    std::int64_t last_window() const;
    std::span<const std::int64_t> windows() const { return windows_; }
    const RowVec& row(std::size_t i) const { return rows_.at(i); }

    // Requires window > every stored index and a nonnegative finite vector.
    void append(std::int64_t window, RowVec w);

    // Seasonal mean over stored rows at the same phase (window ≡ t' mod tau,
    // t' < window). Falls back to the mean over all rows when no stored window
    // shares the phase. Requires window > every stored index.
    RowVec predict(std::int64_t window) const;

  private:
    int dim_;
    std::int64_t tau_;
    std::vector<std::int64_t> windows_;
    std::vector<RowVec> rows_;
};

}  // namespace netsep
