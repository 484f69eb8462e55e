#include "gapnet/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "gapnet/errors.hpp"

namespace gapnet {

void PairGraph::connect(std::size_t i, std::size_t j) {
    if (i >= n || j >= n) throw std::out_of_range("PairGraph::connect: node out of range");
    if (i == j) return;
    adj[i * n + j] = 1;
    adj[j * n + i] = 1;
}

std::size_t PairGraph::edge_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) count += edge(i, j) ? 1 : 0;
    return count;
}

Tensor PairGraph::dense() const {
    std::vector<double> values(adj.begin(), adj.end());
    return Tensor({n, n}, std::move(values));
}

Tensor HyperGraph::incidence() const {
    Tensor h({edges.size(), n}, 0.0);
    auto d = h.mutable_data();
    for (std::size_t e = 0; e < edges.size(); ++e)
        for (std::size_t v : edges[e]) d[e * n + v] = 1.0;
    return h;
}

HyperGraph industry_graph(const std::vector<std::string>& sector_of) {
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < sector_of.size(); ++i) members[sector_of[i]].push_back(i);
    HyperGraph h;
    h.n = sector_of.size();
    for (auto& [sector, list] : members) {
        if (list.size() >= 2) h.edges.push_back(std::move(list));
    }
    std::sort(h.edges.begin(), h.edges.end());
    return h;
}

std::vector<std::string> read_membership(const std::filesystem::path& file, const std::vector<std::string>& tickers) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open membership file " + file.string());
    std::map<std::string, std::string> sector;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError(file.string() + ": expected `ticker,sector`, got '" + line + "'");
        const std::string ticker = line.substr(0, comma), name = line.substr(comma + 1);
        if (first && ticker == "ticker") {
            first = false;
            continue;
        }
        first = false;
        sector[ticker] = name;
    }
    std::vector<std::string> out;
    for (const auto& t : tickers) {
        auto it = sector.find(t);
        if (it == sector.end()) throw DataError("ticker " + t + " has no sector in " + file.string());
        out.push_back(it->second);
    }
    return out;
}

void write_membership(const std::filesystem::path& file, const std::vector<std::string>& tickers,
                      const std::vector<std::string>& sector_of) {
    std::ofstream out(file);
    out << "ticker,sector\n";
    for (std::size_t i = 0; i < tickers.size(); ++i) out << tickers[i] << ',' << sector_of.at(i) << '\n';
    if (!out) throw DataError("failed writing " + file.string());
}

double dtw_distance(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("dtw_distance: empty series");
    const std::size_t m = y.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = x[i - 1] - y[j - 1];
            cur[j] = d * d + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

Tensor normalized_closes(const Tensor& closes, const Segment& window) {
    const std::size_t N = closes.dim(0), T = closes.dim(1);
    if (window.end > T || window.size() == 0) throw DataError("normalized_closes: window outside the panel");
    Tensor out({N, window.size()}, 0.0);
    auto d = out.mutable_data();
    for (std::size_t i = 0; i < N; ++i) {
        const double base = closes[i * T + window.begin];
        for (std::size_t t = 0; t < window.size(); ++t) d[i * window.size() + t] = closes[i * T + window.begin + t] / base;
    }
    return out;
}

std::vector<double> dtw_matrix(const Tensor& series) {
    const std::size_t N = series.dim(0), W = series.dim(1);
    std::vector<double> dist(N * N, 0.0);
    auto row = [&](std::size_t i) { return series.data().subspan(i * W, W); };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) pairs.emplace_back(i, j);
    // each pair writes its own two cells, so workers never share output
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t p = w; p < pairs.size(); p += workers) {
                const auto [i, j] = pairs[p];
                dist[i * N + j] = dist[j * N + i] = dtw_distance(row(i), row(j));
            }
        });
    }
    for (auto& t : pool) t.join();
    return dist;
}

HyperGraph dtw_k_hypergraph(const Tensor& series, std::size_t k) {
    const std::size_t N = series.dim(0);
    if (k >= N) throw ConfigError("dtw_k_hypergraph: k (" + std::to_string(k) + ") must be below N (" + std::to_string(N) + ")");
    const auto dist = dtw_matrix(series);
    HyperGraph h;
    h.n = N;
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t i = 0; i < N; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < N; ++j)
            if (j != i) others.push_back(j);
        std::stable_sort(others.begin(), others.end(),
                         [&](std::size_t a, std::size_t b) { return dist[i * N + a] < dist[i * N + b]; });
        std::vector<std::size_t> edge(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
        edge.push_back(i);
        std::sort(edge.begin(), edge.end());
        if (seen.insert(edge).second) h.edges.push_back(std::move(edge));
    }
    return h;
}

PairGraph correlation_graph(const Tensor& closes, const Segment& window, double rho) {
    const std::size_t N = closes.dim(0), T = closes.dim(1);
    if (window.size() < 2 || window.end > T) throw DataError("correlation_graph: window needs at least 2 days inside the panel");
    const std::size_t R = window.size() - 1;
    std::vector<std::vector<double>> centered(N, std::vector<double>(R));
    std::vector<double> norm(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        double mean = 0.0;
        for (std::size_t t = 0; t < R; ++t) {
            const std::size_t day = window.begin + t + 1;
            centered[i][t] = return_ratio(closes[i * T + day - 1], closes[i * T + day]);
            mean += centered[i][t];
        }
        mean /= static_cast<double>(R);
        for (double& v : centered[i]) {
            v -= mean;
            norm[i] += v * v;
        }
        norm[i] = std::sqrt(norm[i]);
    }
    PairGraph g(N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            if (norm[i] == 0.0 || norm[j] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t t = 0; t < R; ++t) dot += centered[i][t] * centered[j][t];
            if (dot / (norm[i] * norm[j]) > rho) g.connect(i, j);
        }
    return g;
}

PairGraph hyper_to_pairwise(const HyperGraph& h) {
    PairGraph g(h.n);
    for (const auto& e : h.edges)
        for (std::size_t a = 0; a < e.size(); ++a)
            for (std::size_t b = a + 1; b < e.size(); ++b) g.connect(e[a], e[b]);
    return g;
}

HyperGraph pairwise_to_hyper(const PairGraph& g) {
    HyperGraph h;
    h.n = g.n;
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = i + 1; j < g.n; ++j)
            if (g.edge(i, j)) h.edges.push_back({i, j});
    return h;
}

void write_graph(const std::filesystem::path& file, const HyperGraph& h) {
    std::ofstream out(file);
    out << h.n << ' ' << h.edges.size() << '\n';
    for (const auto& e : h.edges) {
        for (std::size_t a = 0; a < e.size(); ++a) out << (a ? " " : "") << e[a];
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + file.string());
}

HyperGraph read_graph(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open graph file " + file.string());
    std::string line;
    std::size_t n = 0, e = 0;
    if (!std::getline(in, line) || !(std::istringstream(line) >> n >> e)) {
        throw DataError(file.string() + ": first line must be `N E`");
    }
    HyperGraph h;
    h.n = n;
    while (h.edges.size() < e && std::getline(in, line)) {
        std::istringstream is(line);
        std::set<std::size_t> members;
        for (std::size_t v; is >> v;) {
            if (v >= n) throw DataError(file.string() + ": node index " + std::to_string(v) + " out of range");
            members.insert(v);
        }
        if (!is.eof()) throw DataError(file.string() + ": malformed edge line '" + line + "'");
        if (members.empty()) throw DataError(file.string() + ": empty hyperedge");
        h.edges.emplace_back(members.begin(), members.end());
    }
    if (h.edges.size() != e) throw DataError(file.string() + ": expected " + std::to_string(e) + " edges");
    return h;
}

}  // namespace gapnet
