#include "gglab/spin_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>

namespace gglab {

namespace {

// Calls visit(indices) for every i_1 < ... < i_p < n in lexicographic order.
void for_each_combination(std::size_t n, int p,
                          const std::function<void(std::span<const std::uint32_t>)>& visit) {
  if (p < 1 || static_cast<std::size_t>(p) > n) return;
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(p));
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<std::uint32_t>(k);
  for (;;) {
    visit(idx);
    std::size_t k = idx.size();
    while (k > 0 && idx[k - 1] == n - idx.size() + k - 1) --k;
    if (k == 0) return;
    ++idx[k - 1];
    for (std::size_t m = k; m < idx.size(); ++m) idx[m] = idx[m - 1] + 1;
  }
}

std::size_t combination_count(std::size_t n, int p) {
  if (p < 0 || static_cast<std::size_t>(p) > n) return 0;
  double c = 1.0;
  for (int k = 1; k <= p; ++k) c = c * static_cast<double>(n - static_cast<std::size_t>(p) + static_cast<std::size_t>(k)) / k;
  return static_cast<std::size_t>(std::llround(c));
}

std::vector<double> gaussian_vector(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<double> g(count);
  for (double& x : g) x = standard_normal(rng);
  return g;
}

double prefactor(std::size_t n, int p) {
  return std::pow(static_cast<double>(n), -0.5 * static_cast<double>(p - 1));
}

}  // namespace

void MixedPSpinModel::validate() const {
  if (n_spins < 1) throw InvalidInput("p-spin model: N must be >= 1");
  if (terms.empty()) throw InvalidInput("p-spin model: need at least one term");
  for (const auto& t : terms) {
    if (t.p < 1 || static_cast<std::size_t>(t.p) > n_spins)
      throw InvalidInput("p-spin model: term order p must be in [1, N]");
    if (!std::isfinite(t.beta) || t.beta < 0.0)
      throw InvalidInput("p-spin model: beta_p must be finite and >= 0");
  }
  for (const auto& t : perturbation) {
    if (t.p < 1 || static_cast<std::size_t>(t.p) > n_spins)
      throw InvalidInput("perturbation: order p must be in [1, N]");
    if (!std::isfinite(t.magnitude) || t.magnitude < 0.0)
      throw InvalidInput("perturbation: magnitude must be finite and >= 0");
  }
}

MixedPSpinModel sk_model(std::size_t n_spins, double beta) {
  MixedPSpinModel m;
  m.n_spins = n_spins;
  m.terms = {{2, beta}};
  m.validate();
  return m;
}

DisorderRealization draw_disorder(const MixedPSpinModel& model, std::uint64_t seed) {
  model.validate();
  DisorderRealization d;
  d.seed = seed;
  for (std::size_t t = 0; t < model.terms.size(); ++t)
    d.couplings.push_back(gaussian_vector(combination_count(model.n_spins, model.terms[t].p),
                                          derive_seed(seed, {0, t})));
  for (std::size_t t = 0; t < model.perturbation.size(); ++t) {
    const auto& pt = model.perturbation[t];
    d.perturbation_couplings.push_back(
        gaussian_vector(combination_count(model.n_spins, pt.p), derive_seed(pt.seed, {1, t})));
  }
  return d;
}

double energy(const MixedPSpinModel& model, const DisorderRealization& disorder,
              std::span<const std::int8_t> sigma) {
  if (sigma.size() != model.n_spins)
    throw InvalidInput("energy: configuration length " + std::to_string(sigma.size()) +
                       " != N = " + std::to_string(model.n_spins));
  auto term_energy = [&](int p, double scale, const std::vector<double>& g) {
    double acc = 0.0;
    std::size_t k = 0;
    for_each_combination(model.n_spins, p, [&](std::span<const std::uint32_t> idx) {
      double prod = g[k++];
      for (auto i : idx) prod *= sigma[i];
      acc += prod;
    });
    return scale * prefactor(model.n_spins, p) * acc;
  };
  double h = 0.0;
  for (std::size_t t = 0; t < model.terms.size(); ++t)
    h += term_energy(model.terms[t].p, model.terms[t].beta, disorder.couplings.at(t));
  for (std::size_t t = 0; t < model.perturbation.size(); ++t)
    h += term_energy(model.perturbation[t].p, model.perturbation[t].magnitude,
                     disorder.perturbation_couplings.at(t));
  return h;
}

MixedPSpinModel add_perturbation(MixedPSpinModel model,
                                 std::span<const PerturbationTerm> schedule) {
  for (const auto& t : schedule) model.perturbation.push_back(t);
  model.validate();
  return model;
}

EnergyKernel::EnergyKernel(const MixedPSpinModel& model, const DisorderRealization& disorder)
    : n_(model.n_spins), per_spin_(model.n_spins) {
  model.validate();
  auto add_term = [&](int p, double scale, const std::vector<double>& g) {
    const double pre = scale * prefactor(n_, p);
    std::size_t k = 0;
    for_each_combination(n_, p, [&](std::span<const std::uint32_t> idx) {
      const double coef = pre * g.at(k++);
      if (coef == 0.0) return;
      term_coefs_.push_back(coef);
      term_sites_.emplace_back(idx.begin(), idx.end());
      for (auto i : idx) {
        Entry e{coef, static_cast<std::uint32_t>(others_.size()),
                static_cast<std::uint32_t>(idx.size() - 1)};
        for (auto j : idx)
          if (j != i) others_.push_back(j);
        per_spin_[i].push_back(e);
      }
    });
  };
  for (std::size_t t = 0; t < model.terms.size(); ++t)
    add_term(model.terms[t].p, model.terms[t].beta, disorder.couplings.at(t));
  for (std::size_t t = 0; t < model.perturbation.size(); ++t)
    add_term(model.perturbation[t].p, model.perturbation[t].magnitude,
             disorder.perturbation_couplings.at(t));
}

double EnergyKernel::energy(std::span<const std::int8_t> sigma) const {
  if (sigma.size() != n_) throw InvalidInput("energy: configuration length mismatch");
  double h = 0.0;
  for (std::size_t t = 0; t < term_coefs_.size(); ++t) {
    double prod = term_coefs_[t];
    for (auto i : term_sites_[t]) prod *= sigma[i];
    h += prod;
  }
  return h;
}

double EnergyKernel::flip_delta(std::span<const std::int8_t> sigma, std::size_t i) const {
  double field = 0.0;
  for (const auto& e : per_spin_[i]) {
    double prod = e.coef;
    for (std::uint32_t k = 0; k < e.n_other; ++k) prod *= sigma[others_[e.first_other + k]];
    field += prod;
  }
  return -2.0 * sigma[i] * field;
}

void MCParams::validate() const {
  if (thinning < 1) throw InvalidInput("mc: thinning must be >= 1");
  if (ladder.empty()) throw InvalidInput("mc: ladder must not be empty");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0)) throw InvalidInput("mc: ladder entries must be > 0");
    if (k > 0 && !(ladder[k] > ladder[k - 1]))
      throw InvalidInput("mc: ladder must be strictly increasing");
  }
  if (ladder.back() != 1.0) throw InvalidInput("mc: ladder must end at 1");
}

std::vector<double> geometric_ladder(double lambda_min, std::size_t count) {
  if (count == 0 || !(lambda_min > 0.0 && lambda_min <= 1.0))
    throw InvalidInput("geometric_ladder: need count >= 1 and lambda_min in (0, 1]");
  if (count == 1) return {1.0};
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = std::pow(lambda_min, static_cast<double>(count - 1 - k) / static_cast<double>(count - 1));
  out.back() = 1.0;
  return out;
}

GibbsChain::GibbsChain(const EnergyKernel& kernel, std::vector<double> ladder, std::uint64_t seed)
    : kernel_(&kernel), ladder_(std::move(ladder)), rng_(make_rng(seed)) {
  rungs_.resize(ladder_.size());
  for (auto& s : rungs_) {
    s.resize(kernel.size());
    for (auto& x : s) x = (rng_() >> 63) ? std::int8_t{1} : std::int8_t{-1};
    energies_.push_back(kernel.energy(s));
  }
}

void GibbsChain::sweep() {
  const std::size_t n = kernel_->size();
  for (std::size_t k = 0; k < rungs_.size(); ++k) {
    auto& s = rungs_[k];
    const double lambda = ladder_[k];
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = uniform_index(rng_, n);
      const double delta = kernel_->flip_delta(s, i);
      if (delta >= 0.0 || uniform01(rng_) < std::exp(lambda * delta)) {
        s[i] = static_cast<std::int8_t>(-s[i]);
        energies_[k] += delta;
      }
    }
  }
  for (std::size_t k = 0; k + 1 < rungs_.size(); ++k) {
    ++swaps_tried_;
    const double log_ratio = (ladder_[k] - ladder_[k + 1]) * (energies_[k + 1] - energies_[k]);
    if (log_ratio >= 0.0 || uniform01(rng_) < std::exp(log_ratio)) {
      std::swap(rungs_[k], rungs_[k + 1]);
      std::swap(energies_[k], energies_[k + 1]);
      ++swaps_accepted_;
    }
  }
}

void GibbsChain::advance(std::size_t sweeps) {
  for (std::size_t s = 0; s < sweeps; ++s) sweep();
}

double GibbsChain::swap_acceptance() const noexcept {
  return swaps_tried_ == 0 ? 0.0
                           : static_cast<double>(swaps_accepted_) / static_cast<double>(swaps_tried_);
}

double spin_overlap(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidInput("spin_overlap: length mismatch");
  long acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return static_cast<double>(acc) / static_cast<double>(a.size());
}

SpinSample gibbs_sample_replicas(const MixedPSpinModel& model, const DisorderRealization& disorder,
                                 std::size_t n, const MCParams& mc) {
  if (n < 1) throw InvalidInput("gibbs_sample_replicas: n must be >= 1");
  mc.validate();
  const EnergyKernel kernel(model, disorder);
  SpinSample out;
  for (std::size_t l = 0; l < n; ++l) {
    GibbsChain chain(kernel, mc.ladder, derive_seed(mc.seed, {l}));
    chain.advance(mc.burn_in);
    out.configurations.push_back(chain.state());
  }
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      e[i * n + j] = spin_overlap(out.configurations[i], out.configurations[j]);
  out.overlaps = OverlapMatrix(n, std::move(e), 1.0);
  return out;
}

EnumeratedGibbs::EnumeratedGibbs(const MixedPSpinModel& model,
                                 const DisorderRealization& disorder)
    : n_(model.n_spins) {
  if (n_ > kMaxEnumeratedSpins)
    throw InvalidInput("enumerate_gibbs_exact: N = " + std::to_string(n_) +
                       " exceeds the enumeration budget of N <= " +
                       std::to_string(kMaxEnumeratedSpins) + " (2^N configurations)");
  const EnergyKernel kernel(model, disorder);
  const std::size_t count = std::size_t{1} << n_;
  std::vector<double> energies(count);
  // Gray-code walk: one spin flip between consecutive configurations.
  Spins s(n_, std::int8_t{-1});
  double h = kernel.energy(s);
  energies[0] = h;
  for (std::size_t k = 1; k < count; ++k) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(k));
    h += kernel.flip_delta(s, bit);
    s[bit] = static_cast<std::int8_t>(-s[bit]);
    energies[k ^ (k >> 1)] = h;
  }
  const double top = *std::max_element(energies.begin(), energies.end());
  weights_.resize(count);
  double z = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    weights_[k] = std::exp(energies[k] - top);
    z += weights_[k];
  }
  cumulative_.resize(count);
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    weights_[k] /= z;
    acc += weights_[k];
    cumulative_[k] = acc;
  }
}

Spins EnumeratedGibbs::configuration(std::uint32_t index, std::size_t n) {
  Spins s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = ((index >> i) & 1U) ? std::int8_t{1} : std::int8_t{-1};
  return s;
}

std::vector<Point> EnumeratedGibbs::sample(std::size_t n, Rng& rng) {
  std::vector<Point> out(n);
  for (auto& p : out) {
    const double u = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    p.key = {static_cast<std::int32_t>(it - cumulative_.begin())};
  }
  return out;
}

double EnumeratedGibbs::overlap(const Point& a, const Point& b) const {
  const auto diff = static_cast<std::uint32_t>(a.key.at(0) ^ b.key.at(0));
  const int d = std::popcount(diff);
  return static_cast<double>(static_cast<long>(n_) - 2L * d) / static_cast<double>(n_);
}

void EnumeratedGibbs::for_each_class(std::span<const Point> replicas, Rng&, std::size_t,
                                     const ClassVisitor& visit) {
  std::vector<double> overlaps(replicas.size());
  Point atom{{0}};
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    atom.key[0] = static_cast<std::int32_t>(k);
    for (std::size_t l = 0; l < replicas.size(); ++l) overlaps[l] = overlap(atom, replicas[l]);
    visit(weights_[k], overlaps);
  }
}

std::vector<ReplicaVector> EnumeratedGibbs::embed(std::span<const Point> points) {
  std::vector<ReplicaVector> out;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
  for (const auto& p : points) {
    const auto s = configuration(static_cast<std::uint32_t>(p.key.at(0)), n_);
    ReplicaVector v;
    for (auto x : s) v.coords.push_back(scale * x);
    out.push_back(std::move(v));
  }
  return out;
}

nlohmann::json EnumeratedGibbs::to_json() const {
  return {{"type", "enumerated"}, {"n_spins", n_}, {"weights", weights_}};
}

EnumeratedGibbs enumerate_gibbs_exact(const MixedPSpinModel& model,
                                      const DisorderRealization& disorder) {
  return EnumeratedGibbs(model, disorder);
}

double exact_ultrametricity(const EnumeratedGibbs& g) {
  if (g.n_spins() > 10) throw InvalidInput("exact_ultrametricity: N <= 10 required (8^N triples)");
  const auto w = g.weights();
  const std::size_t count = w.size();
  const auto n = static_cast<long>(g.n_spins());
  auto r = [&](std::size_t a, std::size_t b) {
    return static_cast<double>(n - 2L * std::popcount(static_cast<std::uint32_t>(a ^ b))) /
           static_cast<double>(n);
  };
  double acc = 0.0;
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t b = 0; b < count; ++b) {
      const double wab = w[a] * w[b];
      const double r12 = r(a, b);
      for (std::size_t c = 0; c < count; ++c)
        if (ultrametric_indicator(r12, r(a, c), r(b, c))) acc += wab * w[c];
    }
  return acc;
}

namespace {

class SpinChainRealization final : public Realization {
 public:
  SpinChainRealization(MixedPSpinModel model, const MCParams& mc, std::uint64_t seed)
      : model_(std::move(model)),
        disorder_(draw_disorder(model_, derive_seed(seed, {0}))),
        kernel_(model_, disorder_),
        mc_(mc),
        seed_(seed) {}

  double q_star() const override { return 1.0; }
  bool is_atomic() const override { return false; }

  std::vector<Point> sample(std::size_t n, Rng&) override {
    while (chains_.size() < n) chains_.push_back(new_chain(chains_.size() + 1));
    std::vector<Point> out(n);
    for (std::size_t l = 0; l < n; ++l) {
      chains_[l].advance(mc_.thinning);
      out[l] = to_point(chains_[l].state());
    }
    return out;
  }

  double overlap(const Point& a, const Point& b) const override {
    if (a.key.size() != b.key.size() || a.key.empty()) throw InvalidInput("spin overlap: bad points");
    long acc = 0;
    for (std::size_t i = 0; i < a.key.size(); ++i) acc += a.key[i] * b.key[i];
    return static_cast<double>(acc) / static_cast<double>(a.key.size());
  }

  // Inner averages from a dedicated chain: inner_m thinned states of mass 1/inner_m.
  void for_each_class(std::span<const Point> replicas, Rng&, std::size_t inner_m,
                      const ClassVisitor& visit) override {
    if (inner_m == 0) throw InvalidInput("inner Monte Carlo needs inner_m >= 1");
    if (!inner_) inner_ = std::make_unique<GibbsChain>(new_chain(0));
    std::vector<double> overlaps(replicas.size());
    const double mass = 1.0 / static_cast<double>(inner_m);
    for (std::size_t k = 0; k < inner_m; ++k) {
      inner_->advance(mc_.thinning);
      const Point p = to_point(inner_->state());
      for (std::size_t l = 0; l < replicas.size(); ++l) overlaps[l] = overlap(p, replicas[l]);
      visit(mass, overlaps);
    }
  }

  std::vector<ReplicaVector> embed(std::span<const Point> points) override {
    std::vector<ReplicaVector> out;
    for (const auto& p : points) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(p.key.size()));
      ReplicaVector v;
      for (auto x : p.key) v.coords.push_back(scale * x);
      out.push_back(std::move(v));
    }
    return out;
  }

  nlohmann::json to_json() const override {
    return {{"type", "spin-chain"}, {"n_spins", model_.n_spins}, {"seed", seed_}};
  }

 private:
  GibbsChain new_chain(std::size_t index) {
    GibbsChain c(kernel_, mc_.ladder, derive_seed(seed_, {1, index}));
    c.advance(mc_.burn_in);
    return c;
  }

  static Point to_point(const Spins& s) {
    Point p;
    p.key.assign(s.begin(), s.end());
    return p;
  }

  MixedPSpinModel model_;
  DisorderRealization disorder_;
  EnergyKernel kernel_;
  MCParams mc_;
  std::uint64_t seed_;
  std::vector<GibbsChain> chains_;
  std::unique_ptr<GibbsChain> inner_;
};

class EnumeratedRealization final : public Realization {
 public:
  explicit EnumeratedRealization(EnumeratedGibbs g) : g_(std::move(g)) {}
  double q_star() const override { return 1.0; }
  bool is_atomic() const override { return true; }
  std::vector<Point> sample(std::size_t n, Rng& rng) override { return g_.sample(n, rng); }
  double overlap(const Point& a, const Point& b) const override { return g_.overlap(a, b); }
  void for_each_class(std::span<const Point> replicas, Rng& rng, std::size_t inner_m,
                      const ClassVisitor& visit) override {
    g_.for_each_class(replicas, rng, inner_m, visit);
  }
  std::vector<ReplicaVector> embed(std::span<const Point> points) override { return g_.embed(points); }
  nlohmann::json to_json() const override { return g_.to_json(); }

 private:
  EnumeratedGibbs g_;
};

}  // namespace

SpinSource::SpinSource(SpinSourceConfig config) : config_(std::move(config)) {
  config_.model.validate();
  config_.mc.validate();
  if (config_.enumerated && config_.model.n_spins > kMaxEnumeratedSpins)
    throw InvalidInput("spin source: enumerated mode needs N <= " +
                       std::to_string(kMaxEnumeratedSpins));
  if (config_.perturbation_box) {
    const auto [lo, hi] = *config_.perturbation_box;
    if (!(lo >= 0.0 && hi >= lo && std::isfinite(hi)))
      throw InvalidInput("spin source: perturbation box must satisfy 0 <= lo <= hi");
  }
}

std::unique_ptr<Realization> SpinSource::realize(std::uint64_t seed) const {
  MixedPSpinModel model = config_.model;
  Rng rng = make_rng(derive_seed(seed, {2}));
  for (std::size_t k = 0; k < model.perturbation.size(); ++k) {
    auto& t = model.perturbation[k];
    t.seed = derive_seed(seed, {3, k, t.seed});
    if (config_.perturbation_box) {
      const auto [lo, hi] = *config_.perturbation_box;
      t.magnitude = lo + (hi - lo) * uniform01(rng);
    }
  }
  if (config_.enumerated)
    return std::make_unique<EnumeratedRealization>(
        EnumeratedGibbs(model, draw_disorder(model, derive_seed(seed, {0}))));
  MCParams mc = config_.mc;
  return std::make_unique<SpinChainRealization>(std::move(model), mc, seed);
}

std::string SpinSource::describe() const {
  std::string s = "pspin(N=" + std::to_string(config_.model.n_spins) + ", terms=[";
  for (std::size_t i = 0; i < config_.model.terms.size(); ++i)
    s += (i ? "," : "") + std::to_string(config_.model.terms[i].p) + ":" +
         std::to_string(config_.model.terms[i].beta);
  s += std::string("], ") + (config_.enumerated ? "exact" : "mc") + ")";
  return s;
}

}  // namespace gglab
