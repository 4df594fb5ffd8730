#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lspm/linalg.hpp"

namespace lspm {

enum class EdgeKind { Binary, Count };

inline std::string to_string(EdgeKind k) { return k == EdgeKind::Binary ? "binary" : "count"; }

struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Square adjacency matrix of non-negative integer edge values.
///
/// The diagonal is always zero, binary networks only hold 0/1 and undirected
/// networks are symmetric. Every mutation goes through `set`, which keeps
/// those invariants.
class Network {
  public:
    using value_type = std::int64_t;

    Network() = default;
    Network(std::size_t n, EdgeKind kind, bool directed)
        : n_(n), kind_(kind), directed_(directed), y_(n * n, 0) {}

    std::size_t size() const noexcept { return n_; }
    EdgeKind kind() const noexcept { return kind_; }
    bool directed() const noexcept { return directed_; }

    value_type operator()(std::size_t i, std::size_t j) const { return y_[i * n_ + j]; }

    void set(std::size_t i, std::size_t j, value_type v) {
        if (i >= n_ || j >= n_) throw NetworkError("edge index out of range");
        if (v < 0) throw NetworkError("negative edge value");
        if (i == j) {
            if (v != 0) throw NetworkError("self-loop at node " + std::to_string(i));
            return;
        }
        if (kind_ == EdgeKind::Binary && v > 1)
            throw NetworkError("binary network entry must be 0 or 1");
        y_[i * n_ + j] = v;
        if (!directed_) y_[j * n_ + i] = v;
    }

    const std::vector<value_type>& values() const noexcept { return y_; }

    /// Number of ordered pairs i != j.
    double ordered_pairs() const noexcept {
        return static_cast<double>(n_) * static_cast<double>(n_ > 0 ? n_ - 1 : 0);
    }

    friend bool operator==(const Network&, const Network&) = default;

  private:
    std::size_t n_ = 0;
    EdgeKind kind_ = EdgeKind::Binary;
    bool directed_ = false;
    std::vector<value_type> y_;
};

enum class FileFormat { Auto, EdgeList, Dense };

struct LoadOptions {
    EdgeKind kind = EdgeKind::Binary;
    bool directed = false;
    FileFormat format = FileFormat::Auto;
    int index_base = 1;      // edge lists only
    std::size_t nodes = 0;   // edge lists: 0 means infer from the largest index
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t k = 0; k <= line.size(); ++k) {
        if (k == line.size() || line[k] == ',') {
            out.push_back(trim(line.substr(start, k - start)));
            start = k + 1;
        }
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size();
}

inline Network::value_type parse_entry(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    if (!parse_double(s, v))
        throw NetworkError("line " + std::to_string(line_no) + ": not a number: '" + std::string(s) + "'");
    if (v < 0) throw NetworkError("line " + std::to_string(line_no) + ": negative entry");
    if (v != std::floor(v) || !std::isfinite(v))
        throw NetworkError("line " + std::to_string(line_no) + ": non-integer entry '" + std::string(s) + "'");
    return static_cast<Network::value_type>(v);
}

struct CsvRows {
    std::vector<std::vector<std::string_view>> rows;
    std::vector<std::size_t> line_numbers;
    std::vector<std::string> storage;
};

inline CsvRows read_rows(std::istream& in) {
    CsvRows out;
    std::string line;
    std::vector<std::string> lines;
    std::vector<std::size_t> numbers;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        lines.emplace_back(t);
        numbers.push_back(no);
    }
    out.storage = std::move(lines);
    for (std::size_t k = 0; k < out.storage.size(); ++k) {
        out.rows.push_back(split_csv(out.storage[k]));
        out.line_numbers.push_back(numbers[k]);
    }
    return out;
}

inline bool is_header(const std::vector<std::string_view>& row) {
    double v = 0.0;
    return !row.empty() && !parse_double(row.front(), v);
}

}  // namespace detail

/// Reads an edge-list CSV (`from,to[,count]`) or a dense n x n adjacency CSV.
///
/// Undirected input is symmetrized by taking the larger of (i,j) and (j,i).
/// Repeated edge-list rows add up for count networks.
inline Network read_network(std::istream& in, const LoadOptions& opt) {
    auto csv = detail::read_rows(in);
    std::size_t first = 0;
    if (!csv.rows.empty() && detail::is_header(csv.rows.front())) first = 1;
    const std::size_t nrows = csv.rows.size() - first;
    if (nrows == 0 && opt.nodes == 0) throw NetworkError("empty network file");

    FileFormat fmt = opt.format;
    if (fmt == FileFormat::Auto) {
        bool square = nrows > 0;
        for (std::size_t r = first; r < csv.rows.size() && square; ++r)
            square = csv.rows[r].size() == nrows;
        fmt = (square && nrows > 3) ? FileFormat::Dense : FileFormat::EdgeList;
        if (square && nrows <= 3 && nrows > 0) {
            // Short files are ambiguous; dense only if every row is 0/1-ish with a zero diagonal.
            bool zero_diag = true;
            for (std::size_t r = 0; r < nrows; ++r) zero_diag = zero_diag && csv.rows[first + r][r] == "0";
            if (zero_diag) fmt = FileFormat::Dense;
        }
    }

    if (fmt == FileFormat::Dense) {
        std::vector<Network::value_type> raw(nrows * nrows);
        for (std::size_t r = 0; r < nrows; ++r) {
            const auto& row = csv.rows[first + r];
            const auto line = csv.line_numbers[first + r];
            if (row.size() != nrows)
                throw NetworkError("line " + std::to_string(line) + ": dense matrix is not square (" +
                                   std::to_string(row.size()) + " columns, " + std::to_string(nrows) +
                                   " rows)");
            for (std::size_t c = 0; c < nrows; ++c) raw[r * nrows + c] = detail::parse_entry(row[c], line);
        }
        Network out(nrows, opt.kind, opt.directed);
        for (std::size_t i = 0; i < nrows; ++i) {
            if (raw[i * nrows + i] != 0)
                throw NetworkError("self-loop entry at node " + std::to_string(i + 1) + " is nonzero");
            for (std::size_t j = 0; j < nrows; ++j) {
                if (i == j) continue;
                auto v = raw[i * nrows + j];
                if (!opt.directed) {
                    if (j < i) continue;
                    v = std::max(v, raw[j * nrows + i]);
                }
                out.set(i, j, v);
            }
        }
        return out;
    }

    if (opt.index_base != 0 && opt.index_base != 1) throw NetworkError("index base must be 0 or 1");
    struct Entry {
        std::size_t i, j;
        Network::value_type w;
        std::size_t line;
    };
    std::vector<Entry> entries;
    std::size_t max_index = 0;
    for (std::size_t r = first; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const auto line = csv.line_numbers[r];
        if (row.size() < 2 || row.size() > 3)
            throw NetworkError("line " + std::to_string(line) + ": expected from,to[,count]");
        const auto a = detail::parse_entry(row[0], line);
        const auto b = detail::parse_entry(row[1], line);
        const Network::value_type w = row.size() == 3 ? detail::parse_entry(row[2], line) : 1;
        if (a < opt.index_base || b < opt.index_base)
            throw NetworkError("line " + std::to_string(line) + ": node index below index base");
        const auto i = static_cast<std::size_t>(a - opt.index_base);
        const auto j = static_cast<std::size_t>(b - opt.index_base);
        if (i == j && w != 0)
            throw NetworkError("line " + std::to_string(line) + ": self-loop " + std::string(row[0]) + "," +
                               std::string(row[1]));
        entries.push_back({i, j, w, line});
        max_index = std::max({max_index, i, j});
    }
    std::size_t n = opt.nodes > 0 ? opt.nodes : max_index + 1;
    if (max_index >= n) throw NetworkError("edge index exceeds declared node count");

    std::vector<Network::value_type> raw(n * n, 0);
    for (const auto& e : entries) {
        auto& slot = raw[e.i * n + e.j];
        if (opt.kind == EdgeKind::Count) {
            slot += e.w;
        } else {
            if (e.w > 1)
                throw NetworkError("line " + std::to_string(e.line) + ": binary network weight must be 0 or 1");
            slot = std::max(slot, e.w);
        }
    }
    Network out(n, opt.kind, opt.directed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            auto v = raw[i * n + j];
            if (!opt.directed) {
                if (j < i) continue;
                v = std::max(v, raw[j * n + i]);
            }
            out.set(i, j, v);
        }
    return out;
}

inline Network load_network(const std::string& path, const LoadOptions& opt) {
    std::ifstream in(path);
    if (!in) throw NetworkError("cannot open " + path);
    return read_network(in, opt);
}

/// Writes the dense adjacency matrix as CSV.
inline void write_dense(std::ostream& out, const Network& net) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        for (std::size_t j = 0; j < net.size(); ++j) {
            if (j) out << ',';
            out << net(i, j);
        }
        out << '\n';
    }
}

/// Writes `from,to,count` rows (undirected networks list each pair once).
inline void write_edge_list(std::ostream& out, const Network& net, int index_base = 1) {
    out << "from,to,count\n";
    for (std::size_t i = 0; i < net.size(); ++i)
        for (std::size_t j = net.directed() ? 0 : i + 1; j < net.size(); ++j)
            if (i != j && net(i, j) != 0)
                out << i + index_base << ',' << j + index_base << ',' << net(i, j) << '\n';
}

inline void save_network(const std::string& path, const Network& net, FileFormat fmt = FileFormat::Dense) {
    std::ofstream out(path);
    if (!out) throw NetworkError("cannot write " + path);
    if (fmt == FileFormat::EdgeList)
        write_edge_list(out, net);
    else
        write_dense(out, net);
}

/// Fraction of ordered pairs i != j with a nonzero entry.
inline double density(const Network& net) {
    if (net.size() < 2) throw NetworkError("density needs at least two nodes");
    std::size_t links = 0;
    for (std::size_t i = 0; i < net.size(); ++i)
        for (std::size_t j = 0; j < net.size(); ++j)
            if (i != j && net(i, j) > 0) ++links;
    return static_cast<double>(links) / net.ordered_pairs();
}

/// Undirected 0/1 adjacency: an edge if either direction is nonzero.
inline std::vector<std::vector<std::size_t>> undirected_neighbours(const Network& net) {
    const std::size_t n = net.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (net(i, j) > 0 || net(j, i) > 0)) adj[i].push_back(j);
    return adj;
}

/// 3 x triangles / connected triples on the binarized, symmetrized graph.
/// Zero when there are no connected triples.
inline double transitivity(const Network& net) {
    const std::size_t n = net.size();
    std::vector<char> a(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (net(i, j) > 0 || net(j, i) > 0)) a[i * n + j] = 1;

    double closed = 0.0;
    double triples = 0.0;
    std::vector<std::size_t> nb;
    for (std::size_t i = 0; i < n; ++i) {
        nb.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (a[i * n + j]) nb.push_back(j);
        const double d = static_cast<double>(nb.size());
        triples += d * (d - 1.0) / 2.0;
        for (std::size_t x = 0; x < nb.size(); ++x)
            for (std::size_t y = x + 1; y < nb.size(); ++y)
                if (a[nb[x] * n + nb[y]]) closed += 1.0;
    }
    return triples > 0 ? closed / triples : 0.0;
}

/// Shortest-path hop counts; zero diagonal and symmetric.
struct GeodesicMatrix {
    Matrix hops;
};

/// BFS hop counts on the binarized, symmetrized graph. Pairs in different
/// components get (largest finite distance + 1).
inline GeodesicMatrix geodesic_distances(const Network& net) {
    const std::size_t n = net.size();
    const auto adj = undirected_neighbours(net);
    constexpr double unreached = -1.0;
    Matrix d(n, n, unreached);
    double max_finite = 0.0;
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < n; ++s) {
        d(s, s) = 0.0;
        queue.assign(1, s);
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto v : adj[u]) {
                if (d(s, v) == unreached) {
                    d(s, v) = d(s, u) + 1.0;
                    max_finite = std::max(max_finite, d(s, v));
                    queue.push_back(v);
                }
            }
        }
    }
    for (auto& v : d.data())
        if (v == unreached) v = max_finite + 1.0;
    return {std::move(d)};
}

}  // namespace lspm
