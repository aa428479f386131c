#include "gglab/cascade.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>
#include <random>

namespace gglab {

PoissonDirichletWeights sample_pd_weights(double zeta, std::size_t k, Rng& rng) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidInput("sample_pd_weights: zeta must be in (0, 1)");
  if (k < 2) throw InvalidInput("sample_pd_weights: truncation K must be >= 2");
  PoissonDirichletWeights out;
  out.zeta = zeta;
  out.weights.resize(k);
  // Work with log arrivals relative to the first so tiny zeta cannot overflow.
  double arrival = 0.0;
  double log_first = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    arrival += standard_exponential(rng);
    const double log_arrival = std::log(arrival);
    if (i == 0) log_first = log_arrival;
    out.weights[i] = std::exp(-(log_arrival - log_first) / zeta);
  }
  double total = 0.0;
  for (double w : out.weights) total += w;
  for (double& w : out.weights) w = std::max(w / total, DBL_MIN);
  return out;
}

PoissonDirichletWeights sample_pd_weights(double alpha, double theta, std::size_t k, Rng& rng) {
  if (theta == 0.0) return sample_pd_weights(alpha, k, rng);
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("sample_pd_weights: alpha must be in (0, 1)");
  if (!(theta > -alpha)) throw InvalidInput("sample_pd_weights: theta must exceed -alpha");
  if (k < 2) throw InvalidInput("sample_pd_weights: truncation K must be >= 2");
  PoissonDirichletWeights out;
  out.zeta = alpha;
  out.weights.reserve(2 * k);
  // Stick breaking: V_j ~ Beta(1 - alpha, theta + j alpha).
  double rest = 1.0;
  for (std::size_t j = 1; j <= k; ++j) {
    std::gamma_distribution<double> ga(1.0 - alpha, 1.0);
    std::gamma_distribution<double> gb(theta + static_cast<double>(j) * alpha, 1.0);
    const double x = ga(rng), y = gb(rng);
    const double v = x + y > 0.0 ? x / (x + y) : 0.0;
    out.weights.push_back(rest * v);
    rest *= 1.0 - v;
  }
  // The unbroken remainder is made of many small pieces; spread it evenly.
  for (std::size_t j = 0; j < k; ++j) out.weights.push_back(rest / static_cast<double>(k));
  std::sort(out.weights.begin(), out.weights.end(), std::greater<>());
  double total = 0.0;
  for (double w : out.weights) total += w;
  for (double& w : out.weights) w = std::max(w / total, DBL_MIN);
  return out;
}

void CascadeConfig::validate() const {
  if (zetas.empty()) throw InvalidInput("cascade: need at least one level");
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    if (!(zetas[i] > 0.0 && zetas[i] < 1.0)) throw InvalidInput("cascade: zetas must lie in (0, 1)");
    if (i > 0 && !(zetas[i] > zetas[i - 1]))
      throw InvalidInput("cascade: zetas must be strictly increasing");
  }
  if (overlaps.size() != zetas.size() + 1)
    throw InvalidInput("cascade: need r + 1 overlap levels q_0 < ... < q_r for r zetas");
  if (!(overlaps.front() >= 0.0)) throw InvalidInput("cascade: q_0 must be >= 0");
  for (std::size_t i = 1; i < overlaps.size(); ++i)
    if (!(overlaps[i] > overlaps[i - 1]))
      throw InvalidInput("cascade: overlaps must be strictly increasing");
  if (!(overlaps.back() <= 1.0)) throw InvalidInput("cascade: q* must be <= 1 (unit ball)");
  if (truncation < 2) throw InvalidInput("cascade: truncation K must be >= 2");
}

CascadeMeasure::CascadeMeasure(CascadeConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.validate();
}

const CascadeMeasure::Node& CascadeMeasure::node(std::span<const std::int32_t> path) {
  std::vector<std::int32_t> key(path.begin(), path.end());
  auto it = nodes_.find(key);
  if (it != nodes_.end()) return it->second;

  std::vector<std::uint64_t> coords;
  coords.reserve(path.size() + 1);
  coords.push_back(path.size());
  for (auto c : path) coords.push_back(static_cast<std::uint64_t>(c));
  Rng rng = make_rng(derive_seed(seed_, coords));
  Node n;
  // Below the root the children of a node are PD(zeta_{d+1}, -zeta_d); plain
  // products of PD(zeta) weights would not give a Ruelle cascade.
  const std::size_t d = path.size();
  const double theta = d == 0 ? 0.0 : -config_.zetas[d - 1];
  n.weights = sample_pd_weights(config_.zetas[d], theta, config_.truncation, rng).weights;
  n.cumulative.resize(n.weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n.weights.size(); ++i) {
    acc += n.weights[i];
    n.cumulative[i] = acc;
  }
  return nodes_.emplace(std::move(key), std::move(n)).first->second;
}

const std::vector<double>& CascadeMeasure::child_weights(std::span<const std::int32_t> path) {
  if (path.size() >= config_.levels()) throw InvalidInput("child_weights: path is a leaf");
  return node(path).weights;
}

std::vector<Point> CascadeMeasure::sample(std::size_t n, Rng& rng) {
  std::vector<Point> out(n);
  const std::size_t r = config_.levels();
  for (auto& p : out) {
    p.key.reserve(r);
    for (std::size_t d = 0; d < r; ++d) {
      const Node& nd = node(p.key);
      const double u = uniform01(rng) * nd.cumulative.back();
      auto it = std::upper_bound(nd.cumulative.begin(), nd.cumulative.end(), u);
      if (it == nd.cumulative.end()) --it;
      p.key.push_back(static_cast<std::int32_t>(it - nd.cumulative.begin()));
    }
  }
  return out;
}

std::size_t CascadeMeasure::common_depth(const Point& a, const Point& b) const {
  const std::size_t r = config_.levels();
  if (a.key.size() != r || b.key.size() != r) throw InvalidInput("cascade: point is not a leaf");
  std::size_t d = 0;
  while (d < r && a.key[d] == b.key[d]) ++d;
  return d;
}

double CascadeMeasure::overlap(const Point& a, const Point& b) const {
  return config_.overlaps[common_depth(a, b)];
}

double CascadeMeasure::leaf_weight(const Point& leaf) {
  if (leaf.key.size() != config_.levels()) throw InvalidInput("cascade: point is not a leaf");
  double w = 1.0;
  std::span<const std::int32_t> path(leaf.key);
  for (std::size_t d = 0; d < leaf.key.size(); ++d)
    w *= node(path.first(d)).weights.at(static_cast<std::size_t>(leaf.key[d]));
  return w;
}

void CascadeMeasure::for_each_class(std::span<const Point> replicas, Rng&, std::size_t,
                                    const ClassVisitor& visit) {
  for (const auto& p : replicas)
    if (p.key.size() != config_.levels()) throw InvalidInput("cascade: point is not a leaf");
  std::vector<std::int32_t> path;
  std::vector<std::size_t> inside(replicas.size());
  for (std::size_t i = 0; i < inside.size(); ++i) inside[i] = i;
  std::vector<double> overlaps(replicas.size(), 0.0);
  visit_subtree(path, 1.0, replicas, inside, overlaps, visit);
}

// Classes below `path`: the leaf itself at depth r, otherwise the children
// off every replica path (overlap q_depth with the replicas inside) plus the
// recursion into each on-path child.
void CascadeMeasure::visit_subtree(std::vector<std::int32_t>& path, double mass,
                                   std::span<const Point> replicas,
                                   std::vector<std::size_t>& inside, std::vector<double>& overlaps,
                                   const ClassVisitor& visit) {
  const std::size_t depth = path.size();
  const double q_here = config_.overlaps[depth];
  for (std::size_t i : inside) overlaps[i] = q_here;
  if (depth == config_.levels()) {
    visit(mass, overlaps);
    return;
  }
  const auto& weights = node(path).weights;

  std::vector<std::int32_t> children;
  for (std::size_t i : inside) children.push_back(replicas[i].key[depth]);
  std::sort(children.begin(), children.end());
  children.erase(std::unique(children.begin(), children.end()), children.end());

  double on_path = 0.0;
  for (auto c : children) on_path += weights[static_cast<std::size_t>(c)];
  const double off = std::max(0.0, 1.0 - on_path);
  if (off > 0.0) visit(mass * off, overlaps);

  for (auto c : children) {
    std::vector<std::size_t> sub;
    for (std::size_t i : inside) {
      if (replicas[i].key[depth] == c) sub.push_back(i);
      else overlaps[i] = q_here;
    }
    path.push_back(c);
    visit_subtree(path, mass * weights[static_cast<std::size_t>(c)], replicas, sub, overlaps,
                  visit);
    path.pop_back();
    for (std::size_t i : sub) overlaps[i] = q_here;
  }
}

std::vector<ReplicaVector> CascadeMeasure::embed(std::span<const Point> points) {
  const std::size_t r = config_.levels();
  std::map<std::vector<std::int32_t>, std::size_t> index;
  for (const auto& p : points) {
    if (p.key.size() != r) throw InvalidInput("cascade: point is not a leaf");
    for (std::size_t d = 0; d <= r; ++d)
      index.try_emplace(std::vector<std::int32_t>(p.key.begin(), p.key.begin() + d), index.size());
  }
  const std::size_t dim = config_.dimension == 0 ? index.size() : config_.dimension;
  if (index.size() > dim)
    throw InvalidInput("cascade: embedding needs " + std::to_string(index.size()) +
                       " dimensions, configured dimension is " + std::to_string(dim));
  std::vector<ReplicaVector> out(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    out[k].coords.assign(dim, 0.0);
    double previous = 0.0;
    for (std::size_t d = 0; d <= r; ++d) {
      const auto& key = points[k].key;
      const std::size_t idx = index.at(std::vector<std::int32_t>(key.begin(), key.begin() + d));
      out[k].coords[idx] = std::sqrt(config_.overlaps[d] - previous);
      previous = config_.overlaps[d];
    }
  }
  return out;
}

nlohmann::json CascadeMeasure::to_json() const {
  auto nodes = nlohmann::json::array();
  for (const auto& [path, n] : nodes_) nodes.push_back({{"path", path}, {"weights", n.weights}});
  return {{"type", "cascade"},
          {"zetas", config_.zetas},
          {"overlaps", config_.overlaps},
          {"truncation", config_.truncation},
          {"seed", seed_},
          {"nodes", nodes}};
}

CascadeMeasure build_cascade(const CascadeConfig& config, std::uint64_t seed) {
  return CascadeMeasure(config, seed);
}

CascadeSource::CascadeSource(CascadeConfig config) : config_(std::move(config)) {
  config_.validate();
}

std::unique_ptr<Realization> CascadeSource::realize(std::uint64_t seed) const {
  return std::make_unique<CascadeMeasure>(config_, seed);
}

std::string CascadeSource::describe() const {
  std::string s = "cascade(r=" + std::to_string(config_.levels()) + ", zetas=[";
  for (std::size_t i = 0; i < config_.zetas.size(); ++i)
    s += (i ? "," : "") + std::to_string(config_.zetas[i]);
  s += "], K=" + std::to_string(config_.truncation) + ")";
  return s;
}

std::optional<DiscreteLaw> CascadeSource::exact_overlap_law() const {
  if (config_.levels() != 1) return std::nullopt;
  return gglab::exact_overlap_law(config_);
}

DiscreteLaw exact_overlap_law(const CascadeConfig& config) {
  config.validate();
  if (config.levels() != 1)
    throw Unsupported("exact_overlap_law: closed form available for one-level cascades only");
  const double zeta = config.zetas[0];
  // Fraction of the Poisson mass beyond K with arrivals replaced by their
  // means: sum_{k>K} k^{-1/zeta} / sum_k k^{-1/zeta}. Renormalizing the
  // truncated weights inflates sum w^2 by about twice that fraction.
  const double s = 1.0 / zeta;
  const auto k_max = static_cast<double>(config.truncation);
  double head = 0.0;
  for (std::size_t k = 1; k <= config.truncation; ++k) head += std::pow(static_cast<double>(k), -s);
  const double tail = std::pow(k_max + 0.5, 1.0 - s) / (s - 1.0);
  DiscreteLaw law;
  law.values = {config.overlaps[0], config.overlaps[1]};
  law.masses = {zeta, 1.0 - zeta};
  law.truncation_bias = 2.0 * tail / (head + tail);
  return law;
}

}  // namespace gglab
