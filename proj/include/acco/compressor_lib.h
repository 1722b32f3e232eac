#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace acco {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive input->output mapping of a combinational cell.
///
/// Row i holds the outputs for input pattern i, where the pattern is read
/// most-significant-first as (x1, ..., xn): x1 is bit n-1 of i. Output j of a
/// row is stored in bit j of the row word, so output 0 is the first column of
/// the textual table.
class TruthTable {
 public:
  static constexpr int kMaxInputs = 5;
  static constexpr int kMaxOutputs = 8;

  TruthTable(std::string name, int n_inputs, int n_outputs,
             std::vector<std::uint32_t> rows, std::vector<int> output_weights);

  const std::string& name() const { return name_; }
  int inputs() const { return n_inputs_; }
  int outputs() const { return n_outputs_; }
  std::size_t num_rows() const { return rows_.size(); }
  std::span<const std::uint32_t> rows() const { return rows_; }
  std::span<const int> weights() const { return weights_; }

  std::uint32_t row(std::size_t i) const { return rows_.at(i); }
  int bit(std::size_t i, int j) const { return (rows_.at(i) >> j) & 1u; }

  /// Input bit j (0-based, j=0 is x1) of pattern i.
  static int input_bit(std::size_t i, int j, int n_inputs) {
    return static_cast<int>((i >> (n_inputs - 1 - j)) & 1u);
  }

  /// Weighted output value of row i, e.g. sum + 2*carry + 2*cout.
  int value(std::size_t i) const;

  /// Column j as a 2^n-bit mask (bit i = output j on pattern i). n <= 5.
  std::uint32_t output_mask(int j) const;

  /// True when every row's weighted output equals its input popcount.
  bool arithmetically_exact() const;

  bool same_shape(const TruthTable& other) const {
    return n_inputs_ == other.n_inputs_ && n_outputs_ == other.n_outputs_;
  }

  friend bool operator==(const TruthTable&, const TruthTable&) = default;

 private:
  std::string name_;
  int n_inputs_;
  int n_outputs_;
  std::vector<std::uint32_t> rows_;
  std::vector<int> weights_;
};

/// Error vector: e_j = probability (under the given input weights) that output
/// bit j differs from the reference cell.
struct ErrorVector {
  std::vector<double> e;
};

class CellLibrary {
 public:
  CellLibrary(std::vector<TruthTable> cells);

  std::span<const TruthTable> cells() const { return cells_; }
  const TruthTable& cell(std::size_t i) const { return cells_.at(i); }
  std::size_t size() const { return cells_.size(); }
  std::size_t exact_reference() const { return exact_; }
  const TruthTable& exact() const { return cells_[exact_]; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  /// Indices of all 4-2 compressor cells (5 inputs, 3 outputs), in library order.
  std::vector<std::size_t> compressor_indices() const;
  bool is_compressor(std::size_t i) const;

 private:
  std::vector<TruthTable> cells_;
  std::size_t exact_ = 0;
};

TruthTable exact_compressor_42();
TruthTable half_adder();
TruthTable full_adder();

CellLibrary load_library(std::string_view source);
CellLibrary load_library_file(const std::string& path);
std::string format_library(const CellLibrary& lib);

/// omega_i = prod_j p_j^{b_ij} (1 - p_j)^{1 - b_ij} over all 2^n patterns.
std::vector<double> input_weights(std::span<const double> p);

/// p_in = H^T omega: probability that each output is 1.
std::vector<double> output_probabilities(const TruthTable& tt,
                                         std::span<const double> omega);

ErrorVector error_vector(const TruthTable& tt, const TruthTable& ref,
                         std::span<const double> omega);

}  // namespace acco
