#include "icar/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "icar/errors.hpp"

namespace icar {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_double(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  for (auto& cell : cells) {
    const auto first = cell.find_first_not_of(" \t");
    const auto last = cell.find_last_not_of(" \t");
    cell = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
  }
  return cells;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

bool NeighborhoodGraph::connected() const { return check_connected(*this); }

void NeighborhoodGraph::validate() const {
  if (n <= 0) throw InvalidInputError("graph has no vertices");
  for (const Edge& e : edges) {
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n)
      throw InvalidInputError("edge index out of range: " + std::to_string(e.i + 1) +
                              "-" + std::to_string(e.j + 1));
    if (e.i == e.j)
      throw InvalidInputError("self-loop at vertex " + std::to_string(e.i + 1));
    if (e.weight < 0.0 || !std::isfinite(e.weight))
      throw InvalidInputError("negative or non-finite weight on edge " +
                              std::to_string(e.i + 1) + "-" + std::to_string(e.j + 1));
  }
  if (!connected()) throw InvalidInputError("graph disconnected: ICAR requires one connected component");
}

bool check_connected(const NeighborhoodGraph& g) {
  if (g.n <= 0) return false;
  UnionFind uf(g.n);
  for (const Edge& e : g.edges)
    if (e.weight > 0.0) uf.unite(e.i, e.j);
  const int root = uf.find(0);
  for (int v = 1; v < g.n; ++v)
    if (uf.find(v) != root) return false;
  return true;
}

NeighborhoodGraph parse_edge_list(const std::string& text, const std::string& origin) {
  // Key (min,max) -> weight; duplicate undirected edges must agree.
  std::map<std::pair<int, int>, double> edge_map;
  int max_vertex = -1;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2 || tokens.size() > 3)
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected 'i j [w]', got " + std::to_string(tokens.size()) +
                       " fields");
    double iv = 0.0, jv = 0.0, w = 1.0;
    if (!parse_double(tokens[0], iv) || iv != std::floor(iv))
      throw ParseError(origin + ":" + std::to_string(lineno) + ": bad vertex index '" +
                       std::string(tokens[0]) + "'");
    if (!parse_double(tokens[1], jv) || jv != std::floor(jv))
      throw ParseError(origin + ":" + std::to_string(lineno) + ": bad vertex index '" +
                       std::string(tokens[1]) + "'");
    if (tokens.size() == 3 && !parse_double(tokens[2], w))
      throw ParseError(origin + ":" + std::to_string(lineno) + ": bad weight '" +
                       std::string(tokens[2]) + "'");
    const int i = static_cast<int>(iv) - 1;  // files are 1-based
    const int j = static_cast<int>(jv) - 1;
    if (i < 0 || j < 0)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": vertex indices are 1-based");
    if (i == j)
      throw InvalidInputError(origin + ":" + std::to_string(lineno) + ": self-loop at vertex " +
                              std::to_string(i + 1));
    if (w < 0.0)
      throw InvalidInputError(origin + ":" + std::to_string(lineno) + ": negative weight");
    const auto key = std::minmax(i, j);
    auto [it, inserted] = edge_map.emplace(key, w);
    if (!inserted && it->second != w)
      throw InvalidInputError(origin + ":" + std::to_string(lineno) +
                              ": duplicate edge " + std::to_string(key.first + 1) + "-" +
                              std::to_string(key.second + 1) + " with conflicting weights");
    max_vertex = std::max({max_vertex, i, j});
  }
  if (max_vertex < 0) throw ParseError(origin + ": no edges found");

  NeighborhoodGraph g;
  g.n = max_vertex + 1;
  g.edges.reserve(edge_map.size());
  for (const auto& [key, w] : edge_map) g.edges.push_back({key.first, key.second, w});
  g.validate();
  return g;
}

NeighborhoodGraph parse_matrix_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw ParseError(origin + ":" + std::to_string(lineno) + ":" + std::to_string(c + 1) +
                         ": non-numeric cell '" + cells[c] + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw ParseError(origin + ": empty matrix");
  for (int i = 0; i < n; ++i)
    if (static_cast<int>(rows[i].size()) != n)
      throw ParseError(origin + ": row " + std::to_string(i + 1) + " has " +
                       std::to_string(rows[i].size()) + " columns, expected " +
                       std::to_string(n));

  NeighborhoodGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i) {
    if (rows[i][i] != 0.0)
      throw InvalidInputError(origin + ": nonzero diagonal at row " + std::to_string(i + 1));
    for (int j = i + 1; j < n; ++j) {
      const double a = rows[i][j], b = rows[j][i];
      const double scale = std::max({std::abs(a), std::abs(b), 1.0});
      if (std::abs(a - b) > 1e-12 * scale)
        throw InvalidInputError(origin + ": asymmetric similarities at (" +
                                std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      if (a < 0.0)
        throw InvalidInputError(origin + ": negative weight at (" + std::to_string(i + 1) +
                                "," + std::to_string(j + 1) + ")");
      if (a > 0.0) g.edges.push_back({i, j, a});
    }
  }
  g.validate();
  return g;
}

NeighborhoodGraph load_adjacency(const std::string& path, AdjacencyFormat format) {
  const std::string text = read_file(path);
  return format == AdjacencyFormat::EdgeList ? parse_edge_list(text, path)
                                             : parse_matrix_csv(text, path);
}

PrecisionStructure build_precision(const NeighborhoodGraph& g) {
  PrecisionStructure prec;
  prec.H = Eigen::MatrixXd::Zero(g.n, g.n);
  for (const Edge& e : g.edges) {
    prec.H(e.i, e.j) -= e.weight;
    prec.H(e.j, e.i) -= e.weight;
  }
  // Diagonal as negated off-diagonal row sum, so integer-weight inputs get
  // exactly zero row sums.
  for (int i = 0; i < g.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < g.n; ++j)
      if (j != i) s += prec.H(i, j);
    prec.H(i, i) = -s;
  }
  return prec;
}

std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return split_csv_line(line);
}

Dataset parse_dataset(const std::string& text, const std::string& origin,
                      const std::string& response,
                      const std::vector<std::string>& regressors) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty file");
  const auto header = split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<int>(c);
    throw InvalidInputError(origin + ": column '" + name + "' not found in header");
  };

  const int y_col = column_of(response);
  std::vector<int> x_cols;
  x_cols.reserve(regressors.size());
  for (const auto& r : regressors) x_cols.push_back(column_of(r));

  std::vector<double> y_vals;
  std::vector<std::vector<double>> x_vals(regressors.size());
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    auto cell_value = [&](int c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw ParseError(origin + ":" + std::to_string(lineno) + ":" + std::to_string(c + 1) +
                         ": non-numeric cell '" + cells[c] + "'");
      return v;
    };
    y_vals.push_back(cell_value(y_col));
    for (std::size_t r = 0; r < x_cols.size(); ++r)
      x_vals[r].push_back(cell_value(x_cols[r]));
  }

  const int n = static_cast<int>(y_vals.size());
  const int p = static_cast<int>(regressors.size()) + 1;
  if (n == 0) throw ParseError(origin + ": no data rows");
  if (n <= p)
    throw InvalidInputError(origin + ": need n > p, got n=" + std::to_string(n) +
                            ", p=" + std::to_string(p));

  Dataset ds;
  ds.y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);
  ds.X_full.resize(n, p);
  ds.X_full.col(0).setOnes();
  for (int r = 0; r + 1 < p; ++r)
    ds.X_full.col(r + 1) = Eigen::Map<Eigen::VectorXd>(x_vals[r].data(), n);
  ds.names = regressors;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ds.X_full);
  if (qr.rank() < p)
    throw InvalidInputError(origin + ": design matrix is rank deficient (rank " +
                            std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
  return ds;
}

Dataset load_dataset(const std::string& path, const std::string& response,
                     const std::vector<std::string>& regressors) {
  return parse_dataset(read_file(path), path, response, regressors);
}

}  // namespace icar
