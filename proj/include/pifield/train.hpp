#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pifield/bvh.hpp"
#include "pifield/camera.hpp"
#include "pifield/featext.hpp"
#include "pifield/field.hpp"
#include "pifield/mesh.hpp"
#include "pifield/occupancy.hpp"
#include "pifield/parallel.hpp"
#include "pifield/sampler.hpp"

namespace pifield {

// ---- losses ----

// Mean squared error over occupancy probabilities.
inline double loss_surface(std::span<const double> pred, std::span<const double> labels) {
    if (pred.size() != labels.size()) throw Error("loss_surface: length mismatch");
    if (pred.empty()) throw Error("loss_surface: empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - labels[i];
        sum += d * d;
    }
    return sum / double(pred.size());
}

// Mean (over samples) of the L1 error summed over the 3 color channels.
inline double loss_texture(std::span<const Vec3> pred, std::span<const Vec3> labels) {
    if (pred.size() != labels.size()) throw Error("loss_texture: length mismatch");
    if (pred.empty()) throw Error("loss_texture: empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum += std::abs(pred[i].x - labels[i].x) + std::abs(pred[i].y - labels[i].y) +
               std::abs(pred[i].z - labels[i].z);
    }
    return sum / double(pred.size());
}

// ---- optimizers ----

struct RmsPropState {
    std::vector<double> v;
    double alpha = 0.99;
    double eps = 1e-8;

    explicit RmsPropState(std::size_t n = 0, double alpha_ = 0.99) : v(n, 0.0), alpha(alpha_) {}
};

inline void step_rmsprop(std::span<double> params, std::span<const double> grads,
                         RmsPropState& state, double lr, std::size_t offset = 0) {
    if (params.size() != grads.size() || offset + params.size() > state.v.size())
        throw Error("step_rmsprop: shape mismatch");
    double* v = state.v.data() + offset;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        v[i] = state.alpha * v[i] + (1.0 - state.alpha) * g * g;
        params[i] -= lr * g / (std::sqrt(v[i]) + state.eps);
    }
}

struct AdamState {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0; // caller bumps once per optimization step

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void step_adam(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double lr, std::size_t offset = 0) {
    if (params.size() != grads.size() || offset + params.size() > state.m.size())
        throw Error("step_adam: shape mismatch");
    if (state.t < 1) throw Error("step_adam: bump t before stepping");
    double* m = state.m.data() + offset;
    double* v = state.v.data() + offset;
    double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

// ---- datasets ----

struct TrainView {
    WeakPerspectiveCamera cam;
    ImagePyramid pyramid;
};

struct TrainObject {
    std::shared_ptr<TriMesh> mesh;
    std::shared_ptr<Bvh> bvh;
    std::vector<TrainView> views;
};

// Builds a training object from a mesh and pre-rendered per-view images.
inline TrainObject make_train_object(TriMesh mesh, std::vector<TrainView> views) {
    TrainObject obj;
    obj.mesh = std::make_shared<TriMesh>(std::move(mesh));
    require_normals(*obj.mesh);
    obj.bvh = std::make_shared<Bvh>(*obj.mesh);
    obj.views = std::move(views);
    return obj;
}

// ---- configuration / report ----

enum class OptimizerKind { RmsProp, Adam };

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::RmsProp;
    double learning_rate = 1e-3;
    double lr_decay_factor = 0.1;
    int lr_decay_epoch = 10;
    int epochs = 12;
    std::size_t points_per_object = 5000;
    int batch_objects = 1;
    std::uint64_t seed = 0;
    bool resample_each_epoch = true;
    double finetune_lr = 1e-4;
    int fuse_views = 3;

    void validate() const {
        if (learning_rate <= 0.0) throw Error("train: learning_rate must be > 0");
        if (epochs < 1) throw Error("train: epochs must be >= 1");
        if (points_per_object == 0) throw Error("train: points_per_object must be > 0");
        if (batch_objects < 1) throw Error("train: batch_objects must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> epoch_losses;
    std::vector<double> epoch_lrs;
    double wall_seconds = 0.0;
    std::uint64_t param_checksum = 0;
    std::vector<std::uint64_t> seed_trail;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t parameter_checksum(const FieldNet& net, const PyramidExtractor& extractor) {
    std::uint64_t h = fnv1a64(net.params().data(), net.params().size() * sizeof(double));
    h = fnv1a64(extractor.weights().data(), extractor.weights().size() * sizeof(double), h);
    h = fnv1a64(extractor.bias().data(), extractor.bias().size() * sizeof(double), h);
    return h;
}

// ---- batch loss + gradient kernels ----

// Gradients for everything trainable in one pass: the MLP parameters plus the
// extractor projection.
struct GradBuffers {
    std::vector<double> net;
    std::vector<double> proj_w;
    std::vector<double> proj_b;

    GradBuffers() = default;
    GradBuffers(const FieldNet& n, const PyramidExtractor& e)
        : net(n.parameter_count(), 0.0), proj_w(e.weights().size(), 0.0),
          proj_b(e.bias().size(), 0.0) {}

    void zero() {
        std::fill(net.begin(), net.end(), 0.0);
        std::fill(proj_w.begin(), proj_w.end(), 0.0);
        std::fill(proj_b.begin(), proj_b.end(), 0.0);
    }

    void add(const GradBuffers& o) {
        for (std::size_t i = 0; i < net.size(); ++i) net[i] += o.net[i];
        for (std::size_t i = 0; i < proj_w.size(); ++i) proj_w[i] += o.proj_w[i];
        for (std::size_t i = 0; i < proj_b.size(); ++i) proj_b[i] += o.proj_b[i];
    }
};

namespace detail {
constexpr std::size_t kPointGrain = 256; // fixed chunk size: reduction order
                                         // never depends on the worker count
}

// Surface loss over one object's occupancy batch, averaged over views and
// points, with gradients for net + extractor projection. `loss_scale`
// multiplies both the loss and the gradients (object-batch averaging).
inline double surface_loss_and_grad(const std::vector<TrainView>& views,
                                    const PyramidExtractor& extractor, const FieldNet& net,
                                    const SampleBatch& batch, GradBuffers* grads,
                                    double loss_scale = 1.0) {
    std::size_t n = batch.size();
    std::size_t n_views = views.size();
    if (n == 0 || n_views == 0) throw Error("surface batch: empty batch or no views");
    int raw_dim = extractor.raw_dim();
    int feat_dim = extractor.feature_dim();
    std::size_t nchunks = (n + detail::kPointGrain - 1) / detail::kPointGrain;
    std::vector<GradBuffers> chunk_grads;
    std::vector<double> chunk_loss(nchunks, 0.0);
    if (grads) chunk_grads.assign(nchunks, GradBuffers(net, extractor));

    double inv_nv = 1.0 / (double(n) * double(n_views));
    parallel_chunks(n, detail::kPointGrain, [&](std::size_t c, std::size_t b, std::size_t e) {
        Workspace ws;
        std::vector<double> raw(raw_dim), feat(feat_dim), d_input(net.spec().input_dim);
        double d_out;
        double loss = 0.0;
        GradBuffers* g = grads ? &chunk_grads[c] : nullptr;
        for (std::size_t i = b; i < e; ++i) {
            const Vec3& x = batch.points[i];
            double label = batch.occupancy[i];
            for (std::size_t v = 0; v < n_views; ++v) {
                Projection pr = project(views[v].cam, x);
                extractor.extract(views[v].pyramid, pr.pixel, raw.data(), feat.data());
                auto out = net.forward(feat, pr.depth, ws);
                double err = out[0] - label;
                loss += err * err;
                if (g) {
                    d_out = 2.0 * err * inv_nv * loss_scale;
                    net.backward(ws, std::span<const double>(&d_out, 1), g->net.data(),
                                 d_input.data());
                    extractor.accumulate_gradient(raw.data(), d_input.data(), g->proj_w.data(),
                                                  g->proj_b.data());
                }
            }
        }
        chunk_loss[c] = loss;
    });
    double total = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) total += chunk_loss[c];
    if (grads)
        for (std::size_t c = 0; c < nchunks; ++c) grads->add(chunk_grads[c]);
    return total * inv_nv * loss_scale;
}

// Texture loss (L1, Eq.-5-style): prediction at the offset query point,
// features F_C (trainable projection) and F_V (frozen) sampled at its
// projection, label = source-surface color.
inline double texture_loss_and_grad(const std::vector<TrainView>& views,
                                    const PyramidExtractor& extractor_c,
                                    const PyramidExtractor& extractor_v, const FieldNet& net,
                                    const SampleBatch& batch, GradBuffers* grads,
                                    double loss_scale = 1.0) {
    std::size_t n = batch.size();
    std::size_t n_views = views.size();
    if (n == 0 || n_views == 0) throw Error("texture batch: empty batch or no views");
    int raw_c = extractor_c.raw_dim();
    int fc = extractor_c.feature_dim();
    int fv = extractor_v.feature_dim();
    std::size_t nchunks = (n + detail::kPointGrain - 1) / detail::kPointGrain;
    std::vector<GradBuffers> chunk_grads;
    std::vector<double> chunk_loss(nchunks, 0.0);
    if (grads) chunk_grads.assign(nchunks, GradBuffers(net, extractor_c));

    double inv_nv = 1.0 / (double(n) * double(n_views));
    parallel_chunks(n, detail::kPointGrain, [&](std::size_t c, std::size_t b, std::size_t e) {
        Workspace ws;
        std::vector<double> raw_cbuf(raw_c), raw_vbuf(extractor_v.raw_dim());
        std::vector<double> feat(fc + fv), d_input(net.spec().input_dim), d_out(3);
        double loss = 0.0;
        GradBuffers* g = grads ? &chunk_grads[c] : nullptr;
        for (std::size_t i = b; i < e; ++i) {
            const Vec3& x = batch.points[i];
            const Vec3& label = batch.colors[i];
            for (std::size_t v = 0; v < n_views; ++v) {
                Projection pr = project(views[v].cam, x);
                extractor_c.extract(views[v].pyramid, pr.pixel, raw_cbuf.data(), feat.data());
                extractor_v.extract(views[v].pyramid, pr.pixel, raw_vbuf.data(),
                                    feat.data() + fc);
                auto out = net.forward(feat, pr.depth, ws);
                for (int ch = 0; ch < 3; ++ch) {
                    double err = out[ch] - label[ch];
                    loss += std::abs(err);
                    d_out[ch] = (err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0)) * inv_nv *
                                loss_scale;
                }
                if (g) {
                    net.backward(ws, d_out, g->net.data(), d_input.data());
                    // Only the F_C slice trains; F_V stays frozen.
                    extractor_c.accumulate_gradient(raw_cbuf.data(), d_input.data(),
                                                    g->proj_w.data(), g->proj_b.data());
                }
            }
        }
        chunk_loss[c] = loss;
    });
    double total = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) total += chunk_loss[c];
    if (grads)
        for (std::size_t c = 0; c < nchunks; ++c) grads->add(chunk_grads[c]);
    return total * inv_nv * loss_scale;
}

// Multi-view surface loss through the pooled-embedding path.
inline double fused_surface_loss_and_grad(const std::vector<const TrainView*>& views,
                                          const PyramidExtractor& extractor, const FieldNet& net,
                                          const SampleBatch& batch, GradBuffers* grads,
                                          double loss_scale = 1.0) {
    std::size_t n = batch.size();
    std::size_t n_views = views.size();
    if (n == 0 || n_views == 0) throw Error("fused batch: empty batch or no views");
    int raw_dim = extractor.raw_dim();
    int feat_dim = extractor.feature_dim();
    int input_dim = net.spec().input_dim;
    std::size_t nchunks = (n + detail::kPointGrain - 1) / detail::kPointGrain;
    std::vector<GradBuffers> chunk_grads;
    std::vector<double> chunk_loss(nchunks, 0.0);
    if (grads) chunk_grads.assign(nchunks, GradBuffers(net, extractor));

    double inv_n = 1.0 / double(n);
    parallel_chunks(n, detail::kPointGrain, [&](std::size_t c, std::size_t b, std::size_t e) {
        std::vector<Workspace> view_ws;
        Workspace tail_ws;
        std::vector<std::vector<double>> inputs(n_views, std::vector<double>(input_dim));
        std::vector<std::vector<double>> raws(n_views, std::vector<double>(raw_dim));
        std::vector<std::vector<double>> d_inputs;
        double d_out;
        double loss = 0.0;
        GradBuffers* g = grads ? &chunk_grads[c] : nullptr;
        for (std::size_t i = b; i < e; ++i) {
            const Vec3& x = batch.points[i];
            double label = batch.occupancy[i];
            for (std::size_t v = 0; v < n_views; ++v) {
                Projection pr = project(views[v]->cam, x);
                extractor.extract(views[v]->pyramid, pr.pixel, raws[v].data(),
                                  inputs[v].data());
                inputs[v][feat_dim] = pr.depth;
            }
            auto out = net.fuse_forward(inputs, view_ws, tail_ws);
            double err = out[0] - label;
            loss += err * err;
            if (g) {
                d_out = 2.0 * err * inv_n * loss_scale;
                net.fuse_backward(view_ws, tail_ws, std::span<const double>(&d_out, 1),
                                  g->net.data(), &d_inputs);
                for (std::size_t v = 0; v < n_views; ++v)
                    extractor.accumulate_gradient(raws[v].data(), d_inputs[v].data(),
                                                  g->proj_w.data(), g->proj_b.data());
            }
        }
        chunk_loss[c] = loss;
    });
    double total = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) total += chunk_loss[c];
    if (grads)
        for (std::size_t c = 0; c < nchunks; ++c) grads->add(chunk_grads[c]);
    return total * inv_n * loss_scale;
}

// ---- optimizer wrapper over (net params, projection W, projection b) ----

class JointOptimizer {
public:
    JointOptimizer(OptimizerKind kind, const FieldNet& net, const PyramidExtractor& extractor)
        : kind_(kind), net_size_(net.parameter_count()), w_size_(extractor.weights().size()),
          b_size_(extractor.bias().size()) {
        std::size_t total = net_size_ + w_size_ + b_size_;
        if (kind_ == OptimizerKind::RmsProp)
            rms_ = RmsPropState(total);
        else
            adam_ = AdamState(total);
    }

    void step(FieldNet& net, PyramidExtractor& extractor, const GradBuffers& grads, double lr) {
        if (kind_ == OptimizerKind::Adam) adam_.t++;
        apply(net.params(), grads.net, 0, lr);
        apply(extractor.weights(), grads.proj_w, net_size_, lr);
        apply(extractor.bias(), grads.proj_b, net_size_ + w_size_, lr);
    }

private:
    void apply(std::vector<double>& p, const std::vector<double>& g, std::size_t offset,
               double lr) {
        if (p.empty()) return;
        if (kind_ == OptimizerKind::RmsProp)
            step_rmsprop(p, g, rms_, lr, offset);
        else
            step_adam(p, g, adam_, lr, offset);
    }

    OptimizerKind kind_;
    std::size_t net_size_, w_size_, b_size_;
    RmsPropState rms_{0};
    AdamState adam_{0};
};

// ---- training loops ----

namespace detail {

inline double epoch_lr(const TrainConfig& cfg, int epoch, double base_lr) {
    return epoch >= cfg.lr_decay_epoch ? base_lr * cfg.lr_decay_factor : base_lr;
}

inline void check_finite(double loss, int epoch, std::size_t object) {
    if (!std::isfinite(loss))
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", object " +
                    std::to_string(object) + ": aborting (NaN policy)");
}

} // namespace detail

// Joint training of the surface field and the extractor projection by
// minimizing the occupancy MSE. Fresh samples each epoch (seed + epoch
// derivation) unless resample_each_epoch is off.
inline TrainReport train_surface(std::vector<TrainObject>& objects, PyramidExtractor& extractor,
                                 FieldNet& net, const TrainConfig& cfg,
                                 const SamplingConfig& sampling) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    JointOptimizer opt(cfg.optimizer, net, extractor);
    GradBuffers grads(net, extractor);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = detail::epoch_lr(cfg, epoch, cfg.learning_rate);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t first = 0; first < objects.size(); first += cfg.batch_objects) {
            std::size_t last = std::min(objects.size(), first + std::size_t(cfg.batch_objects));
            double scale = 1.0 / double(last - first);
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t o = first; o < last; ++o) {
                auto& obj = objects[o];
                SamplingConfig scfg = sampling;
                scfg.n_points = cfg.points_per_object;
                scfg.seed = derive_seed(cfg.seed, "surface-batch",
                                        (cfg.resample_each_epoch ? epoch : 0) *
                                                std::max<std::size_t>(objects.size(), 1) +
                                            o);
                report.seed_trail.push_back(scfg.seed);
                OccupancyOracle oracle(*obj.mesh, *obj.bvh);
                SampleBatch batch = sample_occupancy(*obj.mesh, oracle, scfg);
                batch_loss +=
                    surface_loss_and_grad(obj.views, extractor, net, batch, &grads, scale);
            }
            detail::check_finite(batch_loss, epoch, first);
            opt.step(net, extractor, grads, lr);
            epoch_loss += batch_loss;
            ++steps;
        }
        report.epoch_losses.push_back(epoch_loss / double(steps));
        report.epoch_lrs.push_back(lr);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.param_checksum = parameter_checksum(net, extractor);
    return report;
}

// Texture training: Adam on the color field and its own projection, with the
// surface feature pathway frozen.
inline TrainReport train_texture(std::vector<TrainObject>& objects, PyramidExtractor& extractor_c,
                                 const PyramidExtractor& extractor_v, FieldNet& net_c,
                                 const TrainConfig& cfg, const SamplingConfig& sampling) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    JointOptimizer opt(cfg.optimizer, net_c, extractor_c);
    GradBuffers grads(net_c, extractor_c);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = detail::epoch_lr(cfg, epoch, cfg.learning_rate);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t first = 0; first < objects.size(); first += cfg.batch_objects) {
            std::size_t last = std::min(objects.size(), first + std::size_t(cfg.batch_objects));
            double scale = 1.0 / double(last - first);
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t o = first; o < last; ++o) {
                auto& obj = objects[o];
                SamplingConfig scfg = sampling;
                scfg.n_points = cfg.points_per_object;
                scfg.seed = derive_seed(cfg.seed, "texture-batch",
                                        (cfg.resample_each_epoch ? epoch : 0) *
                                                std::max<std::size_t>(objects.size(), 1) +
                                            o);
                report.seed_trail.push_back(scfg.seed);
                SampleBatch batch = sample_texture(*obj.mesh, scfg);
                batch_loss += texture_loss_and_grad(obj.views, extractor_c, extractor_v, net_c,
                                                    batch, &grads, scale);
            }
            detail::check_finite(batch_loss, epoch, first);
            opt.step(net_c, extractor_c, grads, lr);
            epoch_loss += batch_loss;
            ++steps;
        }
        report.epoch_losses.push_back(epoch_loss / double(steps));
        report.epoch_lrs.push_back(lr);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.param_checksum = parameter_checksum(net_c, extractor_c);
    return report;
}

// Multi-view fine-tuning from a single-view model: each step fuses
// cfg.fuse_views randomly chosen views of the object, at cfg.finetune_lr.
inline TrainReport finetune_multiview(std::vector<TrainObject>& objects,
                                      PyramidExtractor& extractor, FieldNet& net,
                                      const TrainConfig& cfg, const SamplingConfig& sampling) {
    cfg.validate();
    if (net.spec().embed_layer < 0) throw Error("finetune: net has no embed layer");
    auto t0 = std::chrono::steady_clock::now();
    TrainReport report;
    JointOptimizer opt(cfg.optimizer, net, extractor);
    GradBuffers grads(net, extractor);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = detail::epoch_lr(cfg, epoch, cfg.finetune_lr);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t o = 0; o < objects.size(); ++o) {
            auto& obj = objects[o];
            int want = std::min<int>(cfg.fuse_views, int(obj.views.size()));
            if (int(obj.views.size()) < cfg.fuse_views)
                throw Error("finetune: object has fewer than fuse_views views");
            // Seeded partial Fisher-Yates pick of distinct views.
            Rng pick(derive_seed(cfg.seed, "fuse-views",
                                 std::uint64_t(epoch) * objects.size() + o));
            std::vector<int> order(obj.views.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
            std::vector<const TrainView*> chosen;
            for (int k = 0; k < want; ++k) {
                std::size_t j = k + pick.uniform_index(order.size() - k);
                std::swap(order[k], order[j]);
                chosen.push_back(&obj.views[order[k]]);
            }
            SamplingConfig scfg = sampling;
            scfg.n_points = cfg.points_per_object;
            scfg.seed = derive_seed(cfg.seed, "finetune-batch",
                                    (cfg.resample_each_epoch ? epoch : 0) *
                                            std::max<std::size_t>(objects.size(), 1) +
                                        o);
            report.seed_trail.push_back(scfg.seed);
            OccupancyOracle oracle(*obj.mesh, *obj.bvh);
            SampleBatch batch = sample_occupancy(*obj.mesh, oracle, scfg);
            grads.zero();
            double loss = fused_surface_loss_and_grad(chosen, extractor, net, batch, &grads);
            detail::check_finite(loss, epoch, o);
            opt.step(net, extractor, grads, lr);
            epoch_loss += loss;
            ++steps;
        }
        report.epoch_losses.push_back(epoch_loss / double(steps));
        report.epoch_lrs.push_back(lr);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.param_checksum = parameter_checksum(net, extractor);
    return report;
}

} // namespace pifield
