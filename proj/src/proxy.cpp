#include "fxchain/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

#include "fxchain/dynamics.hpp"
#include "fxchain/error.hpp"
#include "fxchain/kernels.hpp"
#include "fxchain/nn.hpp"
#include "fxchain/parallel.hpp"
#include "fxchain/random.hpp"
#include "primitives.hpp"

namespace fxchain::proxy {
namespace {

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

const double kFeatureScale = 1.0 / -std::log(kFeatureFloor);

std::size_t in_channels(const ProxyConfig& cfg, std::size_t layer) {
  return layer == 0 ? kInputChannels : cfg.channels;
}

void check_q(std::span<const double> q) {
  if (q.size() != kConditioningInputs) {
    throw Error(Errc::LengthMismatch, "the proxy takes " + std::to_string(kConditioningInputs) + " parameters");
  }
}

}  // namespace

struct ProxyModel::Cache {
  std::size_t n = 0;
  std::vector<double> x, q;
  std::vector<double> e;
  std::vector<std::vector<double>> h;  // input of each layer, then the final features
  std::vector<std::vector<double>> z, act;
  std::vector<std::vector<double>> gamma, beta;
  std::vector<double> g;
};

void ProxyConfig::validate() const {
  if (channels == 0 || layers == 0 || kernel == 0 || dilation_growth == 0 || conditioning_width == 0) {
    throw Error(Errc::Config, "proxy sizes must be positive");
  }
}

std::size_t ProxyConfig::dilation(std::size_t layer) const {
  std::size_t d = 1;
  for (std::size_t l = 0; l < layer; ++l) d *= dilation_growth;
  return d;
}

std::size_t ProxyConfig::receptive_field() const {
  std::size_t rf = 1;
  for (std::size_t l = 0; l < layers; ++l) rf += (kernel - 1) * dilation(l);
  return rf;
}

void ProxyModel::layout() {
  cfg_.validate();
  const std::size_t c = cfg_.channels, w = cfg_.conditioning_width, k = cfg_.kernel;
  std::size_t o = 0;
  off_.cond_w = o;
  o += w * kConditioningInputs;
  off_.cond_b = o;
  o += w;
  off_.conv_w.clear();
  off_.conv_b.clear();
  off_.film_w.clear();
  off_.film_b.clear();
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    off_.conv_w.push_back(o);
    o += c * in_channels(cfg_, l) * k;
    off_.conv_b.push_back(o);
    o += c;
    off_.film_w.push_back(o);
    o += 2 * c * w;
    off_.film_b.push_back(o);
    o += 2 * c;
  }
  off_.out_w = o;
  o += c;
  off_.out_b = o;
  o += 1;
  off_.total = o;
}

ProxyModel::ProxyModel(ProxyConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  layout();
  weights_.assign(off_.total, 0.0);
  std::span<double> w(weights_);
  const std::size_t c = cfg_.channels, cw = cfg_.conditioning_width, k = cfg_.kernel;
  nn::init_uniform_fan_in(w.subspan(off_.cond_w, cw * kConditioningInputs), kConditioningInputs,
                          derive_seed(seed, {0}));
  nn::init_uniform_fan_in(w.subspan(off_.cond_b, cw), kConditioningInputs, derive_seed(seed, {1}));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::size_t fan = in_channels(cfg_, l) * k;
    nn::init_uniform_fan_in(w.subspan(off_.conv_w[l], c * fan), fan, derive_seed(seed, {2, l}));
    nn::init_uniform_fan_in(w.subspan(off_.conv_b[l], c), fan, derive_seed(seed, {3, l}));
    nn::init_uniform_fan_in(w.subspan(off_.film_w[l], 2 * c * cw), cw, derive_seed(seed, {4, l}));
    // FiLM starts close to the identity modulation.
    for (double& v : w.subspan(off_.film_w[l], 2 * c * cw)) v *= 0.1;
  }
  nn::init_uniform_fan_in(w.subspan(off_.out_w, c), c, derive_seed(seed, {5}));
  nn::init_uniform_fan_in(w.subspan(off_.out_b, 1), c, derive_seed(seed, {6}));
}

ProxyModel::ProxyModel(ProxyConfig cfg, std::vector<double> weights) : cfg_(cfg), weights_(std::move(weights)) {
  layout();
  if (weights_.size() != off_.total) throw Error(Errc::ShapeMismatch, "proxy weights do not match the configuration");
}

std::shared_ptr<ProxyModel::Cache> ProxyModel::forward_cached(std::span<const double> x,
                                                              std::span<const double> q) const {
  check_q(q);
  const std::size_t n = x.size(), c = cfg_.channels, cw = cfg_.conditioning_width, k = cfg_.kernel;
  const std::span<const double> w(weights_);
  auto cache = std::make_shared<Cache>();
  cache->n = n;
  cache->x.assign(x.begin(), x.end());
  cache->q.assign(q.begin(), q.end());

  cache->e.resize(cw);
  for (std::size_t j = 0; j < cw; ++j) {
    cache->e[j] = std::tanh(w[off_.cond_b + j] + kernels::dot(w.subspan(off_.cond_w + j * kConditioningInputs,
                                                                        kConditioningInputs),
                                                              q));
  }

  std::vector<double> feat(kInputChannels * n);
  for (std::size_t i = 0; i < n; ++i) {
    feat[i] = x[i];
    feat[n + i] = std::log(std::max(std::abs(x[i]), kFeatureFloor)) * kFeatureScale + 1.0;
  }
  cache->h.push_back(std::move(feat));

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::size_t in = in_channels(cfg_, l), d = cfg_.dilation(l);
    const auto& h = cache->h[l];
    std::vector<double> gamma(c), beta(c);
    for (std::size_t o = 0; o < c; ++o) {
      gamma[o] = 1.0 + w[off_.film_b[l] + o] + kernels::dot(w.subspan(off_.film_w[l] + o * cw, cw), cache->e);
      beta[o] = w[off_.film_b[l] + c + o] + kernels::dot(w.subspan(off_.film_w[l] + (c + o) * cw, cw), cache->e);
    }
    std::vector<double> z(c * n), act(c * n), next(c * n);
    for (std::size_t o = 0; o < c; ++o) {
      std::span<double> zo(z.data() + o * n, n);
      std::fill(zo.begin(), zo.end(), w[off_.conv_b[l] + o]);
      for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
          const std::size_t s = t * d;
          if (s >= n) break;
          kernels::axpy(w[off_.conv_w[l] + (o * in + i) * k + t], std::span<const double>(h.data() + i * n, n - s),
                        zo.subspan(s));
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = o * n + i;
        act[idx] = std::tanh(gamma[o] * z[idx] + beta[o]);
        next[idx] = act[idx] + (l > 0 ? h[idx] : 0.0);
      }
    }
    cache->z.push_back(std::move(z));
    cache->act.push_back(std::move(act));
    cache->gamma.push_back(std::move(gamma));
    cache->beta.push_back(std::move(beta));
    cache->h.push_back(std::move(next));
  }

  const auto& hl = cache->h.back();
  std::vector<double> s(n, w[off_.out_b]);
  for (std::size_t o = 0; o < c; ++o) kernels::axpy(w[off_.out_w + o], std::span(hl.data() + o * n, n), s);
  cache->g.resize(n);
  for (std::size_t i = 0; i < n; ++i) cache->g[i] = sigmoid(s[i]);
  return cache;
}

const std::vector<double>& ProxyModel::cached_gain(const Cache& cache) const { return cache.g; }

std::vector<double> ProxyModel::gain(std::span<const double> x, std::span<const double> q) const {
  return forward_cached(x, q)->g;
}

std::vector<double> ProxyModel::forward(std::span<const double> x, std::span<const double> q) const {
  auto g = gain(x, q);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
  return g;
}

void ProxyModel::backward(const Cache& cache, std::span<const double> grad_gain, std::span<double> gw,
                          std::span<double> gx, std::span<double> gq) const {
  const std::size_t n = cache.n, c = cfg_.channels, cw = cfg_.conditioning_width, k = cfg_.kernel;
  const std::span<const double> w(weights_);
  const bool want_w = !gw.empty();

  std::vector<double> ds(n);
  for (std::size_t i = 0; i < n; ++i) ds[i] = grad_gain[i] * cache.g[i] * (1.0 - cache.g[i]);
  const auto& hl = cache.h.back();
  std::vector<double> dh(c * n);
  for (std::size_t o = 0; o < c; ++o) {
    if (want_w) gw[off_.out_w + o] += kernels::dot(ds, std::span(hl.data() + o * n, n));
    kernels::axpy(w[off_.out_w + o], ds, std::span(dh.data() + o * n, n));
  }
  if (want_w) gw[off_.out_b] += std::accumulate(ds.begin(), ds.end(), 0.0);

  std::vector<double> de(cw, 0.0);
  for (std::size_t l = cfg_.layers; l-- > 0;) {
    const std::size_t in = in_channels(cfg_, l), d = cfg_.dilation(l);
    const auto& h = cache.h[l];
    const auto& z = cache.z[l];
    const auto& act = cache.act[l];
    std::vector<double> dprev(in * n, 0.0);
    if (l > 0) dprev = dh;  // residual path
    std::vector<double> dz(n);
    for (std::size_t o = 0; o < c; ++o) {
      double dgamma = 0.0, dbeta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = o * n + i;
        const double du = dh[idx] * (1.0 - act[idx] * act[idx]);
        dgamma += du * z[idx];
        dbeta += du;
        dz[i] = du * cache.gamma[l][o];
      }
      // FiLM projections.
      kernels::axpy(dgamma, w.subspan(off_.film_w[l] + o * cw, cw), de);
      kernels::axpy(dbeta, w.subspan(off_.film_w[l] + (c + o) * cw, cw), de);
      if (want_w) {
        kernels::axpy(dgamma, cache.e, gw.subspan(off_.film_w[l] + o * cw, cw));
        kernels::axpy(dbeta, cache.e, gw.subspan(off_.film_w[l] + (c + o) * cw, cw));
        gw[off_.film_b[l] + o] += dgamma;
        gw[off_.film_b[l] + c + o] += dbeta;
        gw[off_.conv_b[l] + o] += std::accumulate(dz.begin(), dz.end(), 0.0);
      }
      for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
          const std::size_t s = t * d;
          if (s >= n) break;
          const std::size_t wi = off_.conv_w[l] + (o * in + i) * k + t;
          const std::span<const double> dzs(dz.data() + s, n - s);
          if (want_w) gw[wi] += kernels::dot(dzs, std::span<const double>(h.data() + i * n, n - s));
          kernels::axpy(w[wi], dzs, std::span<double>(dprev.data() + i * n, n - s));
        }
      }
    }
    dh = std::move(dprev);
  }

  // Conditioning embedding.
  for (std::size_t j = 0; j < cw; ++j) {
    const double dpre = de[j] * (1.0 - cache.e[j] * cache.e[j]);
    if (want_w) {
      gw[off_.cond_b + j] += dpre;
      kernels::axpy(dpre, cache.q, gw.subspan(off_.cond_w + j * kConditioningInputs, kConditioningInputs));
    }
    if (!gq.empty()) kernels::axpy(dpre, w.subspan(off_.cond_w + j * kConditioningInputs, kConditioningInputs), gq);
  }

  if (!gx.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(cache.x[i]);
      gx[i] += dh[i];
      if (a > kFeatureFloor) gx[i] += dh[n + i] * kFeatureScale / cache.x[i];
    }
  }
}

namespace {

struct TapeContext {
  std::shared_ptr<const ProxyModel> model;
  std::shared_ptr<ProxyModel::Cache> cache;
};

}  // namespace

ad::Var proxy_gain(ad::Var x, ad::Var q, std::shared_ptr<const ProxyModel> model) {
  ad::Tape& tape = ad::detail::tape_of({x, q});
  auto cache = model->forward_cached(x.value(), q.value());
  ad::Node node;
  node.op = "proxy_gain";
  node.value = cache->g;
  node.inputs = {x.index(), q.index()};
  node.context = std::make_shared<const TapeContext>(TapeContext{std::move(model), std::move(cache)});
  return tape.record(std::move(node));
}

ad::Var proxy_compress(ad::Var x, ad::Var q, std::shared_ptr<const ProxyModel> model) {
  return x * proxy_gain(x, q, std::move(model));
}

std::vector<double> hybrid_render(std::span<const double> x, std::span<const double> q,
                                  std::span<const ParamSpec> specs, double fs) {
  check_q(q);
  const auto p = denormalize(ParamVector{{q.begin(), q.end()}, ParamKind::Normalized}, specs).values;
  return dynamics::compress(x, {p[0], p[1], p[2], p[3], p[4]}, fs);
}

AudioBuffer hybrid_render(const AudioBuffer& x, const ParamVector& q, std::span<const ParamSpec> specs) {
  return {hybrid_render(x.view(), q.values, specs, x.sample_rate()), x.sample_rate()};
}

namespace {

struct Draw {
  std::vector<double> x, y, q;
};

Draw draw_example(std::span<const AudioBuffer> clips, std::span<const std::size_t> pool,
                  std::span<const ParamSpec> specs, double segment_s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& clip = clips[pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]];
  const std::size_t len = std::min(clip.size(), samples_for(segment_s, clip.sample_rate()));
  const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, clip.size() - len)(rng);
  Draw d;
  d.x = peak_normalize(clip.view().subspan(offset, len));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  d.q.resize(kConditioningInputs);
  for (double& v : d.q) v = u(rng);
  d.y = hybrid_render(d.x, d.q, specs, clip.sample_rate());
  return d;
}

double mae_on(const ProxyModel& model, std::span<const AudioBuffer> clips, std::span<const std::size_t> pool,
              std::span<const ParamSpec> specs, double segment_s, std::size_t draws, std::uint64_t seed) {
  std::vector<double> err(pool.size() * draws), count(pool.size() * draws);
  parallel_for(err.size(), [&](std::size_t j) {
    const std::size_t clip = pool[j / draws];
    const auto d = draw_example(clips, std::span(&clip, 1), specs, segment_s, derive_seed(seed, {clip, j % draws}));
    const auto y_hat = model.forward(d.x, d.q);
    double s = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) s += std::abs(y_hat[i] - d.y[i]);
    err[j] = s;
    count[j] = static_cast<double>(y_hat.size());
  });
  return std::accumulate(err.begin(), err.end(), 0.0) / std::accumulate(count.begin(), count.end(), 0.0);
}

}  // namespace

double proxy_mae(const ProxyModel& model, std::span<const AudioBuffer> clips, std::span<const ParamSpec> specs,
                 double segment_s, std::size_t draws_per_clip, std::uint64_t seed) {
  if (clips.empty()) throw Error(Errc::EmptyCorpus, "no clips to evaluate the proxy on");
  std::vector<std::size_t> pool(clips.size());
  std::iota(pool.begin(), pool.end(), 0);
  return mae_on(model, clips, pool, specs, segment_s, draws_per_clip, seed);
}

ProxyModel proxy_train(std::span<const AudioBuffer> corpus, std::span<const ParamSpec> specs,
                       const ProxyConfig& model_cfg, const ProxyTrainConfig& cfg, ProxyTrainReport* report) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "proxy training needs at least one clip");
  if (specs.size() != kConditioningInputs) throw Error(Errc::Config, "proxy training needs the 5 compressor ranges");
  if (cfg.batch_size == 0 || cfg.steps == 0) throw Error(Errc::Config, "proxy batch size and steps must be positive");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(derive_seed(cfg.seed, {0})));
  std::size_t held = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(corpus.size())));
  if (corpus.size() >= 2) held = std::clamp<std::size_t>(held, 1, corpus.size() - 1);
  else held = 0;
  const std::span<const std::size_t> holdout(order.data(), held);
  const std::span<const std::size_t> train(order.data() + held, order.size() - held);
  const auto eval_pool = held > 0 ? holdout : train;
  const std::uint64_t eval_seed = derive_seed(cfg.seed, {1});

  ProxyModel model(model_cfg, derive_seed(cfg.seed, {2}));
  ProxyTrainReport rep;
  rep.receptive_field = model_cfg.receptive_field();
  rep.baseline_mae = mae_on(model, corpus, eval_pool, specs, cfg.segment_s, cfg.eval_draws, eval_seed);

  nn::Adam adam(model.weight_count(), {cfg.learning_rate});
  std::vector<std::vector<double>> grads(cfg.batch_size, std::vector<double>(model.weight_count()));
  std::vector<double> losses(cfg.batch_size), counts(cfg.batch_size);
  std::vector<double> total(model.weight_count());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    parallel_for(cfg.batch_size, [&](std::size_t b) {
      const auto d = draw_example(corpus, train, specs, cfg.segment_s, derive_seed(cfg.seed, {3, step, b}));
      auto cache = model.forward_cached(d.x, d.q);
      const auto& g = model.cached_gain(*cache);
      std::vector<double> dg(d.x.size());
      double loss = 0.0;
      for (std::size_t i = 0; i < dg.size(); ++i) {
        const double e = g[i] * d.x[i] - d.y[i];
        loss += std::abs(e);
        dg[i] = (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) * d.x[i];
      }
      std::fill(grads[b].begin(), grads[b].end(), 0.0);
      model.backward(*cache, dg, grads[b], {}, {});
      losses[b] = loss;
      counts[b] = static_cast<double>(dg.size());
    });
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::fill(total.begin(), total.end(), 0.0);
    for (const auto& g : grads) kernels::axpy(1.0 / n, g, total);
    rep.loss.push_back(std::accumulate(losses.begin(), losses.end(), 0.0) / n);
    // Cosine decay to a tenth of the initial rate.
    const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
    adam.set_learning_rate(cfg.learning_rate * (0.55 + 0.45 * std::cos(std::numbers::pi * progress)));
    adam.step(model.weights(), total);
  }
  rep.trained_mae = mae_on(model, corpus, eval_pool, specs, cfg.segment_s, cfg.eval_draws, eval_seed);
  if (report != nullptr) *report = std::move(rep);
  return model;
}

}  // namespace fxchain::proxy

namespace fxchain::ad::detail {

void register_proxy(PrimitiveRegistry& r) {
  r.define("proxy_gain", [](const Tape&, const Node& n, std::span<const double> g,
                            std::span<std::vector<double>* const> gi) {
    const auto& ctx = *static_cast<const proxy::TapeContext*>(n.context.get());
    std::span<double> gx, gq;
    if (gi[0] != nullptr) gx = *gi[0];
    if (gi[1] != nullptr) gq = *gi[1];
    if (gx.empty() && gq.empty()) return;
    ctx.model->backward(*ctx.cache, g, {}, gx, gq);
  });
}

}  // namespace fxchain::ad::detail
