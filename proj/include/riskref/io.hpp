#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "riskref/core.hpp"
#include "riskref/error.hpp"
#include "riskref/matrix.hpp"
#include "riskref/metrics.hpp"
#include "riskref/toybnn/train.hpp"

// Interchange formats. All text is UTF-8 with '\n' line ends; numbers are
// written with 17 significant digits so every double round-trips exactly.
//
//   predictions   id,label,p0,...,p{M-1}             one row per example
//   stack         id,sample,label,p0,...,p{M-1}      one row per (example, draw)
//   features      id,label,x0,...,x{D-1}             one row per example
//   confusion     M rows of M comma-separated integers, row = predicted class
//   model         see save_model
namespace riskref::io {

inline std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

inline double parse_double(std::string_view s, const std::string& path, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(Errc::ParseError, where(path, line) + ": bad number '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view s, const std::string& path, std::size_t line) {
  s = trim(s);
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(Errc::ParseError, where(path, line) + ": bad integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp);
    out << contents;
    if (!out.flush()) throw Error(Errc::IoError, "cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(Errc::IoError, "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

namespace detail {

// Checks a header of the form <fixed...>,<prefix>0,...,<prefix>{K-1}; returns K.
inline std::size_t check_header(const std::vector<std::string>& lines, const std::string& path,
                                const std::vector<std::string>& fixed, char prefix) {
  if (lines.empty()) throw Error(Errc::ParseError, where(path, 1) + ": missing header");
  const auto cols = split(lines.front());
  if (cols.size() < fixed.size() + 1) throw Error(Errc::ParseError, where(path, 1) + ": too few header columns");
  for (std::size_t k = 0; k < fixed.size(); ++k)
    if (trim(cols[k]) != fixed[k])
      throw Error(Errc::ParseError, where(path, 1) + ": expected column '" + fixed[k] + "'");
  const std::size_t extra = cols.size() - fixed.size();
  for (std::size_t k = 0; k < extra; ++k)
    if (trim(cols[fixed.size() + k]) != std::string(1, prefix) + std::to_string(k))
      throw Error(Errc::ParseError, where(path, 1) + ": expected column '" + prefix + std::to_string(k) + "'");
  return extra;
}

inline std::string header(const std::vector<std::string>& fixed, char prefix, std::size_t k) {
  std::string h;
  for (const auto& f : fixed) h += f + ",";
  for (std::size_t j = 0; j < k; ++j) h += std::string(1, prefix) + std::to_string(j) + (j + 1 < k ? "," : "");
  return h + "\n";
}

inline void parse_probs(const std::vector<std::string_view>& cols, std::size_t first, std::span<double> row,
                        const std::string& path, std::size_t line) {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = parse_double(cols[first + j], path, line);
  if (!riskref::detail::normalize_row(row))
    throw Error(Errc::InvalidProbabilityRow, where(path, line) + ": probabilities do not form a distribution");
}

inline int parse_label(std::string_view s, std::size_t m, const std::string& path, std::size_t line) {
  const int y = parse_int<int>(s, path, line);
  if (y < 0 || static_cast<std::size_t>(y) >= m)
    throw Error(Errc::InvalidLabel, where(path, line) + ": label " + std::to_string(y) + " out of range");
  return y;
}

}  // namespace detail

inline PredictionSet load_predictions(const std::string& path) {
  const auto lines = read_lines(path);
  const std::size_t m = detail::check_header(lines, path, {"id", "label"}, 'p');
  if (m < 2) throw Error(Errc::ParseError, where(path, 1) + ": at least two probability columns are required");
  const std::size_t n = lines.size() - 1;
  Matrix probs(n, m);
  std::vector<int> labels(n);
  std::vector<std::string> ids(n);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line = i + 2;
    const auto cols = split(lines[i + 1]);
    if (cols.size() != m + 2)
      throw Error(Errc::ParseError, where(path, line) + ": expected " + std::to_string(m + 2) + " fields");
    ids[i] = std::string(trim(cols[0]));
    if (ids[i].empty()) throw Error(Errc::ParseError, where(path, line) + ": empty id");
    if (!seen.insert(ids[i]).second) throw Error(Errc::DuplicateId, where(path, line) + ": id '" + ids[i] + "'");
    labels[i] = detail::parse_label(cols[1], m, path, line);
    detail::parse_probs(cols, 2, probs.row(i), path, line);
  }
  return PredictionSet(std::move(probs), std::move(labels), std::move(ids));
}

inline std::string predictions_to_string(const PredictionSet& preds) {
  std::string out = detail::header({"id", "label"}, 'p', preds.n_classes());
  for (std::size_t i = 0; i < preds.n_examples(); ++i) {
    out += preds.ids()[i] + "," + std::to_string(preds.labels()[i]);
    for (double p : preds.row(i)) out += "," + format_double(p);
    out += "\n";
  }
  return out;
}

inline void save_predictions(const std::string& path, const PredictionSet& preds) {
  write_atomic(path, predictions_to_string(preds));
}

inline SampleStack load_stack(const std::string& path) {
  const auto lines = read_lines(path);
  const std::size_t m = detail::check_header(lines, path, {"id", "sample", "label"}, 'p');
  if (m < 2) throw Error(Errc::ParseError, where(path, 1) + ": at least two probability columns are required");

  struct Cell {
    std::vector<double> probs;
    std::size_t line;
  };
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> index_of;
  std::vector<int> labels;
  std::vector<std::map<std::size_t, Cell>> cells;
  std::size_t n_samples = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t line = r + 1;
    const auto cols = split(lines[r]);
    if (cols.size() != m + 3)
      throw Error(Errc::ParseError, where(path, line) + ": expected " + std::to_string(m + 3) + " fields");
    const std::string id(trim(cols[0]));
    if (id.empty()) throw Error(Errc::ParseError, where(path, line) + ": empty id");
    const auto s = parse_int<std::size_t>(cols[1], path, line);
    const int y = detail::parse_label(cols[2], m, path, line);
    auto [it, inserted] = index_of.emplace(id, ids.size());
    if (inserted) {
      ids.push_back(id);
      labels.push_back(y);
      cells.emplace_back();
    } else if (labels[it->second] != y) {
      throw Error(Errc::InconsistentLabel, where(path, line) + ": example '" + id + "' changes label");
    }
    Cell cell{std::vector<double>(m), line};
    detail::parse_probs(cols, 3, cell.probs, path, line);
    if (!cells[it->second].emplace(s, std::move(cell)).second)
      throw Error(Errc::ParseError, where(path, line) + ": duplicate cell (example '" + id + "', sample " +
                                        std::to_string(s) + ")");
    n_samples = std::max(n_samples, s + 1);
  }
  if (ids.empty()) throw Error(Errc::EmptyStack, path + ": no rows");
  std::vector<Matrix> samples(n_samples, Matrix(ids.size(), m));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t s = 0; s < n_samples; ++s) {
      auto found = cells[i].find(s);
      if (found == cells[i].end())
        throw Error(Errc::MissingCell, path + ": example '" + ids[i] + "' (index " + std::to_string(i) +
                                           ") has no sample " + std::to_string(s));
      std::copy(found->second.probs.begin(), found->second.probs.end(), samples[s].row(i).begin());
    }
  return SampleStack(std::move(samples), std::move(labels), std::move(ids));
}

inline std::string stack_to_string(const SampleStack& stack) {
  std::string out = detail::header({"id", "sample", "label"}, 'p', stack.n_classes());
  for (std::size_t i = 0; i < stack.n_examples(); ++i)
    for (std::size_t s = 0; s < stack.n_samples(); ++s) {
      out += stack.ids()[i] + "," + std::to_string(s) + "," + std::to_string(stack.labels()[i]);
      for (double p : stack.sample(s).row(i)) out += "," + format_double(p);
      out += "\n";
    }
  return out;
}

inline void save_stack(const std::string& path, const SampleStack& stack) { write_atomic(path, stack_to_string(stack)); }

inline ConfusionMatrix load_confusion(const std::string& path) {
  const auto lines = read_lines(path);
  const std::size_t m = lines.size();
  if (m < 2) throw Error(Errc::ParseError, path + ": a confusion matrix needs at least two rows");
  std::vector<std::int64_t> counts;
  for (std::size_t i = 0; i < m; ++i) {
    const auto cols = split(lines[i]);
    if (cols.size() != m)
      throw Error(Errc::ParseError, where(path, i + 1) + ": expected " + std::to_string(m) + " counts");
    for (auto c : cols) {
      const auto v = parse_int<std::int64_t>(c, path, i + 1);
      if (v < 0) throw Error(Errc::ParseError, where(path, i + 1) + ": negative count");
      counts.push_back(v);
    }
  }
  return ConfusionMatrix(m, std::move(counts));
}

inline std::string confusion_to_string(const ConfusionMatrix& c) {
  std::string out;
  for (std::size_t i = 0; i < c.m(); ++i) {
    for (std::size_t j = 0; j < c.m(); ++j) out += std::to_string(c(i, j)) + (j + 1 < c.m() ? "," : "\n");
  }
  return out;
}

inline void save_confusion(const std::string& path, const ConfusionMatrix& c) {
  write_atomic(path, confusion_to_string(c));
}

inline toybnn::Dataset load_features(const std::string& path) {
  const auto lines = read_lines(path);
  const std::size_t d = detail::check_header(lines, path, {"id", "label"}, 'x');
  const std::size_t n = lines.size() - 1;
  toybnn::Dataset data{Matrix(n, d), std::vector<int>(n), std::vector<std::string>(n)};
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t line = i + 2;
    const auto cols = split(lines[i + 1]);
    if (cols.size() != d + 2)
      throw Error(Errc::ParseError, where(path, line) + ": expected " + std::to_string(d + 2) + " fields");
    data.ids[i] = std::string(trim(cols[0]));
    if (!seen.insert(data.ids[i]).second) throw Error(Errc::DuplicateId, where(path, line) + ": id '" + data.ids[i] + "'");
    data.y[i] = parse_int<int>(cols[1], path, line);
    if (data.y[i] < 0) throw Error(Errc::InvalidLabel, where(path, line) + ": negative label");
    for (std::size_t j = 0; j < d; ++j) data.x(i, j) = parse_double(cols[2 + j], path, line);
  }
  return data;
}

inline std::string features_to_string(const toybnn::Dataset& data) {
  std::string out = detail::header({"id", "label"}, 'x', data.x.cols());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += data.ids[i] + "," + std::to_string(data.y[i]);
    for (double v : data.x.row(i)) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

inline void save_features(const std::string& path, const toybnn::Dataset& data) {
  write_atomic(path, features_to_string(data));
}

/// Model bundle, version 1, whitespace separated:
///
///   riskref-model 1
///   method <map|mc-dropout|ensemble|mfvi|radial|gvi>
///   layers <L> <w0> ... <w{L-1}>
///   dropout_rate <r>
///   tensors <T>
///   T lines: tensor <group> <rows> <cols> <rows*cols values>
///
/// Groups are member<k> (W0, b0, W1, b1, ... of deterministic member k) or
/// mu / rho (same order, variational posterior).
inline std::string model_to_string(const toybnn::ModelBundle& b) {
  std::ostringstream out;
  out << "riskref-model 1\n";
  out << "method " << toybnn::to_string(b.method) << "\n";
  out << "layers " << b.layer_sizes.size();
  for (auto w : b.layer_sizes) out << " " << w;
  out << "\ndropout_rate " << format_double(b.dropout_rate) << "\n";
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  for (std::size_t k = 0; k < b.members.size(); ++k)
    for (const auto& p : b.members[k].params) tensors.emplace_back("member" + std::to_string(k), &p);
  if (toybnn::is_variational(b.method)) {
    for (const auto& p : b.posterior.mu) tensors.emplace_back("mu", &p);
    for (const auto& p : b.posterior.rho) tensors.emplace_back("rho", &p);
  }
  out << "tensors " << tensors.size() << "\n";
  for (const auto& [group, m] : tensors) {
    out << "tensor " << group << " " << m->rows() << " " << m->cols();
    for (double v : m->data()) out << " " << format_double(v);
    out << "\n";
  }
  return out.str();
}

inline void save_model(const std::string& path, const toybnn::ModelBundle& b) { write_atomic(path, model_to_string(b)); }

inline toybnn::ModelBundle model_from_string(const std::string& text, const std::string& path = "<model>") {
  std::istringstream in(text);
  auto expect = [&](const std::string& word) {
    std::string w;
    if (!(in >> w) || w != word) throw Error(Errc::ParseError, path + ": expected '" + word + "'");
  };
  auto read_token = [&]() {
    std::string w;
    if (!(in >> w)) throw Error(Errc::ParseError, path + ": unexpected end of file");
    return w;
  };
  expect("riskref-model");
  if (read_token() != "1") throw Error(Errc::ParseError, path + ": unsupported model version");
  toybnn::ModelBundle b;
  expect("method");
  b.method = toybnn::method_from_string(read_token());
  expect("layers");
  const auto n_layers = parse_int<std::size_t>(read_token(), path, 0);
  for (std::size_t k = 0; k < n_layers; ++k) b.layer_sizes.push_back(parse_int<std::size_t>(read_token(), path, 0));
  toybnn::validate_layer_sizes(b.layer_sizes);
  expect("dropout_rate");
  b.dropout_rate = parse_double(read_token(), path, 0);
  expect("tensors");
  const auto n_tensors = parse_int<std::size_t>(read_token(), path, 0);
  const auto shapes = toybnn::param_shapes(b.layer_sizes);
  std::map<std::string, std::vector<Matrix>> groups;
  std::vector<std::string> order;
  for (std::size_t t = 0; t < n_tensors; ++t) {
    expect("tensor");
    const std::string group = read_token();
    const auto rows = parse_int<std::size_t>(read_token(), path, 0);
    const auto cols = parse_int<std::size_t>(read_token(), path, 0);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = parse_double(read_token(), path, 0);
    if (!groups.count(group)) order.push_back(group);
    auto& g = groups[group];
    if (g.size() >= shapes.size() || shapes[g.size()] != std::pair{rows, cols})
      throw Error(Errc::ShapeMismatch, path + ": tensor of group " + group + " does not match the layer sizes");
    g.push_back(std::move(m));
  }
  for (const auto& [name, g] : groups)
    if (g.size() != shapes.size()) throw Error(Errc::ShapeMismatch, path + ": group " + name + " is incomplete");
  if (toybnn::is_variational(b.method)) {
    if (!groups.count("mu") || !groups.count("rho")) throw Error(Errc::ParseError, path + ": missing mu/rho tensors");
    b.posterior = toybnn::VariationalMlp{b.layer_sizes, groups["mu"], groups["rho"]};
  } else {
    for (std::size_t k = 0; groups.count("member" + std::to_string(k)); ++k)
      b.members.push_back(toybnn::ToyMlp{b.layer_sizes, groups["member" + std::to_string(k)], b.dropout_rate});
    if (b.members.empty()) throw Error(Errc::ParseError, path + ": no member tensors");
  }
  return b;
}

inline toybnn::ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_string(buf.str(), path);
}

}  // namespace riskref::io
