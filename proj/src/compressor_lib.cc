#include "acco/compressor_lib.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace acco {

namespace {

int majority(int a, int b, int c) { return (a & b) | (a & c) | (b & c); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

int parse_int(const std::string& tok, const std::string& cell, int line) {
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("cell '" + cell + "' line " + std::to_string(line) +
                     ": expected integer, got '" + tok + "'");
  }
}

}  // namespace

TruthTable::TruthTable(std::string name, int n_inputs, int n_outputs,
                       std::vector<std::uint32_t> rows,
                       std::vector<int> output_weights)
    : name_(std::move(name)),
      n_inputs_(n_inputs),
      n_outputs_(n_outputs),
      rows_(std::move(rows)),
      weights_(std::move(output_weights)) {
  if (n_inputs_ < 1 || n_inputs_ > kMaxInputs)
    throw Error("cell '" + name_ + "': input count out of range");
  if (n_outputs_ < 1 || n_outputs_ > kMaxOutputs)
    throw Error("cell '" + name_ + "': output count out of range");
  if (rows_.size() != (std::size_t{1} << n_inputs_))
    throw Error("cell '" + name_ + "': row count mismatch (expected " +
                std::to_string(1u << n_inputs_) + ", got " +
                std::to_string(rows_.size()) + ")");
  for (auto r : rows_)
    if (r >> n_outputs_)
      throw Error("cell '" + name_ + "': row wider than output count");
  if (weights_.size() != static_cast<std::size_t>(n_outputs_))
    throw Error("cell '" + name_ + "': weight count mismatch");
  for (int w : weights_)
    if (w <= 0) throw Error("cell '" + name_ + "': weights must be positive");
}

int TruthTable::value(std::size_t i) const {
  int v = 0;
  for (int j = 0; j < n_outputs_; ++j) v += weights_[j] * bit(i, j);
  return v;
}

std::uint32_t TruthTable::output_mask(int j) const {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < rows_.size(); ++i)
    mask |= static_cast<std::uint32_t>((rows_[i] >> j) & 1u) << i;
  return mask;
}

bool TruthTable::arithmetically_exact() const {
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (value(i) != std::popcount(static_cast<unsigned>(i))) return false;
  return true;
}

CellLibrary::CellLibrary(std::vector<TruthTable> cells) : cells_(std::move(cells)) {
  for (std::size_t i = 0; i < cells_.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (cells_[i].name() == cells_[k].name())
        throw ParseError("cell '" + cells_[i].name() + "': duplicate name");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (is_compressor(i) && cells_[i].arithmetically_exact()) {
      exact_ = i;
      return;
    }
  }
  throw ParseError("library: missing exact reference (no arithmetically exact 5-input, 3-output cell)");
}

std::optional<std::size_t> CellLibrary::find(std::string_view name) const {
  for (std::size_t i = 0; i < cells_.size(); ++i)
    if (cells_[i].name() == name) return i;
  return std::nullopt;
}

std::size_t CellLibrary::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw Error("library has no cell named '" + std::string(name) + "'");
  return *i;
}

bool CellLibrary::is_compressor(std::size_t i) const {
  const auto& c = cells_.at(i);
  return c.inputs() == 5 && c.outputs() == 3;
}

std::vector<std::size_t> CellLibrary::compressor_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cells_.size(); ++i)
    if (is_compressor(i)) out.push_back(i);
  return out;
}

TruthTable exact_compressor_42() {
  std::vector<std::uint32_t> rows(32);
  for (std::size_t i = 0; i < 32; ++i) {
    int x1 = TruthTable::input_bit(i, 0, 5), x2 = TruthTable::input_bit(i, 1, 5);
    int x3 = TruthTable::input_bit(i, 2, 5), x4 = TruthTable::input_bit(i, 3, 5);
    int cin = TruthTable::input_bit(i, 4, 5);
    int cout = majority(x1, x2, x3);
    int s1 = x1 ^ x2 ^ x3;
    int carry = majority(s1, x4, cin);
    int sum = s1 ^ x4 ^ cin;
    rows[i] = static_cast<std::uint32_t>(sum | carry << 1 | cout << 2);
  }
  return TruthTable("EXACT42", 5, 3, std::move(rows), {1, 2, 2});
}

TruthTable half_adder() {
  std::vector<std::uint32_t> rows(4);
  for (std::size_t i = 0; i < 4; ++i) {
    int a = TruthTable::input_bit(i, 0, 2), b = TruthTable::input_bit(i, 1, 2);
    rows[i] = static_cast<std::uint32_t>((a ^ b) | (a & b) << 1);
  }
  return TruthTable("HA", 2, 2, std::move(rows), {1, 2});
}

TruthTable full_adder() {
  std::vector<std::uint32_t> rows(8);
  for (std::size_t i = 0; i < 8; ++i) {
    int a = TruthTable::input_bit(i, 0, 3), b = TruthTable::input_bit(i, 1, 3);
    int c = TruthTable::input_bit(i, 2, 3);
    rows[i] = static_cast<std::uint32_t>((a ^ b ^ c) | majority(a, b, c) << 1);
  }
  return TruthTable("FA", 3, 2, std::move(rows), {1, 2});
}

CellLibrary load_library(std::string_view source) {
  std::vector<TruthTable> cells;
  std::istringstream in{std::string(source)};
  std::string raw;
  int line_no = 0;

  struct Pending {
    std::string name;
    int n = 0, m = 0;
    std::vector<int> weights;
    std::vector<std::uint32_t> rows;
    int header_line = 0;
  };
  std::optional<Pending> cur;

  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto toks = split_ws(line);

    if (!cur) {
      if (toks[0] != "cell")
        throw ParseError("line " + std::to_string(line_no) + ": expected 'cell', got '" + toks[0] + "'");
      if (toks.size() < 5 || toks[4] != "weights")
        throw ParseError("line " + std::to_string(line_no) +
                         ": header must be 'cell <name> <n> <m> weights w1..wm'");
      Pending p;
      p.name = toks[1];
      p.n = parse_int(toks[2], p.name, line_no);
      p.m = parse_int(toks[3], p.name, line_no);
      if (p.n < 1 || p.n > TruthTable::kMaxInputs || p.m < 1 || p.m > TruthTable::kMaxOutputs)
        throw ParseError("cell '" + p.name + "': unsupported shape n=" + toks[2] + " m=" + toks[3]);
      for (std::size_t k = 5; k < toks.size(); ++k) p.weights.push_back(parse_int(toks[k], p.name, line_no));
      if (p.weights.size() != static_cast<std::size_t>(p.m))
        throw ParseError("cell '" + p.name + "': weight count mismatch (expected " +
                         std::to_string(p.m) + ")");
      p.header_line = line_no;
      cur = std::move(p);
      continue;
    }

    if (toks[0] == "end") {
      std::size_t expect = std::size_t{1} << cur->n;
      if (cur->rows.size() != expect)
        throw ParseError("cell '" + cur->name + "': row count mismatch (expected " +
                         std::to_string(expect) + ", got " + std::to_string(cur->rows.size()) + ")");
      try {
        cells.emplace_back(cur->name, cur->n, cur->m, std::move(cur->rows), std::move(cur->weights));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(e.what());
      }
      cur.reset();
      continue;
    }

    if (toks.size() != 1 || toks[0].size() != static_cast<std::size_t>(cur->m))
      throw ParseError("cell '" + cur->name + "' line " + std::to_string(line_no) +
                       ": bit-width mismatch (expected " + std::to_string(cur->m) + " output bits)");
    std::uint32_t row = 0;
    for (int j = 0; j < cur->m; ++j) {
      char ch = toks[0][j];
      if (ch != '0' && ch != '1')
        throw ParseError("cell '" + cur->name + "' line " + std::to_string(line_no) +
                         ": invalid bit '" + std::string(1, ch) + "'");
      row |= static_cast<std::uint32_t>(ch - '0') << j;
    }
    if (cur->rows.size() >= (std::size_t{1} << cur->n))
      throw ParseError("cell '" + cur->name + "': row count mismatch (more than " +
                       std::to_string(1u << cur->n) + " rows)");
    cur->rows.push_back(row);
  }
  if (cur) throw ParseError("cell '" + cur->name + "': missing 'end'");
  return CellLibrary(std::move(cells));
}

CellLibrary load_library_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open library file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return load_library(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string format_library(const CellLibrary& lib) {
  std::ostringstream out;
  for (const auto& c : lib.cells()) {
    out << "cell " << c.name() << ' ' << c.inputs() << ' ' << c.outputs() << " weights";
    for (int w : c.weights()) out << ' ' << w;
    out << '\n';
    for (std::size_t i = 0; i < c.num_rows(); ++i) {
      for (int j = 0; j < c.outputs(); ++j) out << c.bit(i, j);
      out << '\n';
    }
    out << "end\n";
  }
  return out.str();
}

std::vector<double> input_weights(std::span<const double> p) {
  const int n = static_cast<int>(p.size());
  for (double pj : p)
    if (!(pj >= 0.0 && pj <= 1.0)) throw Error("input_weights: marginal outside [0,1]");
  std::vector<double> omega(std::size_t{1} << n);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    double w = 1.0;
    for (int j = 0; j < n; ++j)
      w *= TruthTable::input_bit(i, j, n) ? p[j] : 1.0 - p[j];
    omega[i] = w;
  }
  return omega;
}

std::vector<double> output_probabilities(const TruthTable& tt,
                                         std::span<const double> omega) {
  if (omega.size() != tt.num_rows())
    throw Error("output_probabilities: weight vector length " + std::to_string(omega.size()) +
                " does not match " + std::to_string(tt.num_rows()) + " rows of '" + tt.name() + "'");
  std::vector<double> p(tt.outputs(), 0.0);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    auto r = tt.row(i);
    for (int j = 0; j < tt.outputs(); ++j)
      if ((r >> j) & 1u) p[j] += omega[i];
  }
  for (auto& v : p) v = std::min(1.0, std::max(0.0, v));
  return p;
}

ErrorVector error_vector(const TruthTable& tt, const TruthTable& ref,
                         std::span<const double> omega) {
  if (!tt.same_shape(ref))
    throw Error("error_vector: shape mismatch between '" + tt.name() + "' and '" + ref.name() + "'");
  if (omega.size() != tt.num_rows()) throw Error("error_vector: weight vector length mismatch");
  ErrorVector ev{std::vector<double>(tt.outputs(), 0.0)};
  for (std::size_t i = 0; i < omega.size(); ++i) {
    auto diff = tt.row(i) ^ ref.row(i);
    for (int j = 0; j < tt.outputs(); ++j)
      if ((diff >> j) & 1u) ev.e[j] += omega[i];
  }
  for (auto& v : ev.e) v = std::min(1.0, std::max(0.0, v));
  return ev;
}

}  // namespace acco
