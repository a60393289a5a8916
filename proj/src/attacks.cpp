#include "noisec/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <fstream>

#include "noisec/checkpoint.hpp"
#include "noisec/rng.hpp"

namespace noisec::attacks {

namespace {

float sign0(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

// Settles (x_mal, eta) to a fixed point where, bitwise, x_mal is in [0,1],
// eta == x_mal - x, and |eta| <= bound. f32 rounding can push a freshly
// computed coordinate one ulp over the budget; the loop nudges it back.
void settle(const Tensor& x, Tensor& x_mal, Tensor& eta, float bound) {
    if (!x.same_shape(x_mal)) throw TensorError("attack output shape mismatch");
    eta = Tensor::zeros(x.shape);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        float xm = clamp01(x_mal[i]);
        for (int guard = 0; guard < 64; ++guard) {
            float e = xm - x[i];
            if (std::fabs(e) > bound) {
                xm = std::nextafterf(xm, x[i]);
                continue;
            }
            float back = x[i] + e;
            if (back != xm || back < 0.0f || back > 1.0f) {
                xm = (back >= 0.0f && back <= 1.0f) ? back : std::nextafterf(xm, x[i]);
                continue;
            }
            break;
        }
        x_mal[i] = xm;
        eta[i] = xm - x[i];
    }
}

MaliciousSample make_sample(const Tensor& x, Tensor x_mal, AttackKind kind, float bound) {
    MaliciousSample s;
    s.kind = kind;
    settle(x, x_mal, s.eta, bound);
    s.x_mal = std::move(x_mal);
    return s;
}

constexpr float kNoBound = std::numeric_limits<float>::infinity();

}  // namespace

const char* attack_name(AttackKind k) {
    switch (k) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Bim: return "bim";
        case AttackKind::Pgd: return "pgd";
        case AttackKind::Jsma: return "jsma";
        case AttackKind::Uap: return "uap";
        case AttackKind::Cw: return "cw";
        case AttackKind::Badnet: return "badnet";
    }
    return "?";
}

AttackKind attack_from_name(const std::string& name) {
    for (AttackKind k : {AttackKind::Fgsm, AttackKind::Bim, AttackKind::Pgd, AttackKind::Jsma,
                         AttackKind::Uap, AttackKind::Cw, AttackKind::Badnet})
        if (name == attack_name(k)) return k;
    throw TensorError("unknown attack kind: " + name);
}

void AttackConfig::validate() const {
    if (!(eps >= 0.0f)) throw TensorError("attack config: eps must be >= 0");
    if (kind == AttackKind::Bim || kind == AttackKind::Pgd) {
        if (!(alpha > 0.0f)) throw TensorError("attack config: alpha must be > 0");
        if (iters < 0) throw TensorError("attack config: iters must be >= 0");
    }
    if (kind == AttackKind::Jsma) {
        if (!(gamma > 0.0f && gamma <= 1.0f)) throw TensorError("attack config: gamma must be in (0,1]");
        if (theta == 0.0f) throw TensorError("attack config: theta must be nonzero");
    }
    if (kind == AttackKind::Cw) {
        if (!(cw_c >= 0.0f)) throw TensorError("attack config: c must be >= 0");
        if (!(cw_kappa >= 0.0f)) throw TensorError("attack config: kappa must be >= 0");
    }
    if (kind == AttackKind::Uap && !(uap_budget > 0.0f))
        throw TensorError("attack config: uap budget must be > 0");
}

Tensor TargetModel::logit_sum_grad(const Tensor& x) const {
    Tensor g = Tensor::zeros(x.shape);
    for (int c = 0; c < classes(); ++c) {
        Tensor gc = logit_grad(x, c);
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += gc[i];
    }
    return g;
}

Tensor ClassifierTarget::loss_grad(const Tensor& x, int y_true) const {
    Tape tape;
    const auto& in = model_->arch().input;
    Var vx = tape.input(x, true);
    Var x4 = tape.reshape(vx, {1, in[0], in[1], in[2]});
    Var logits = model_->forward_logits(tape, x4);
    tape.backward(tape.cross_entropy(logits, {y_true}));
    return tape.grad(vx);
}

Tensor ClassifierTarget::logit_grad(const Tensor& x, int cls) const {
    Tape tape;
    const auto& in = model_->arch().input;
    Var vx = tape.input(x, true);
    Var x4 = tape.reshape(vx, {1, in[0], in[1], in[2]});
    Var logits = model_->forward_logits(tape, x4);
    tape.backward(tape.pick(logits, 0, cls));
    return tape.grad(vx);
}

Tensor ClassifierTarget::logit_sum_grad(const Tensor& x) const {
    Tape tape;
    const auto& in = model_->arch().input;
    Var vx = tape.input(x, true);
    Var x4 = tape.reshape(vx, {1, in[0], in[1], in[2]});
    Var logits = model_->forward_logits(tape, x4);
    tape.backward(tape.sum(logits));
    return tape.grad(vx);
}

// ---------------------------------------------------------------------------
// L-inf gradient-sign family

namespace {

// Shared BIM/PGD loop in delta space. delta starts at `delta0`, each
// iteration adds alpha*sign(grad) and re-clamps to the eps ball; the box
// constraint is folded back into delta at evaluation points.
MaliciousSample linf_iterative(const TargetModel& model, const Tensor& x, int y_true, float eps,
                               float alpha, int iters, Tensor delta, AttackKind kind) {
    for (std::int64_t i = 0; i < delta.numel(); ++i)
        delta[i] = std::clamp(delta[i], -eps, eps);
    for (int t = 0; t < iters; ++t) {
        Tensor x_eval = x;
        for (std::int64_t i = 0; i < x.numel(); ++i) x_eval[i] = clamp01(x[i] + delta[i]);
        Tensor g = model.loss_grad(x_eval, y_true);
        for (std::int64_t i = 0; i < delta.numel(); ++i) {
            float d = (x_eval[i] - x[i]) + alpha * sign0(g[i]);
            delta[i] = std::clamp(d, -eps, eps);
        }
    }
    Tensor x_mal = x;
    for (std::int64_t i = 0; i < x.numel(); ++i) x_mal[i] = x[i] + delta[i];
    MaliciousSample s = make_sample(x, std::move(x_mal), kind, eps);
    return s;
}

}  // namespace

MaliciousSample fgsm(const TargetModel& model, const Tensor& x, int y_true, float eps) {
    if (!(eps >= 0.0f)) throw TensorError("fgsm: eps must be >= 0");
    Tensor g = model.loss_grad(x, y_true);
    Tensor x_mal = x;
    for (std::int64_t i = 0; i < x.numel(); ++i) x_mal[i] = x[i] + eps * sign0(g[i]);
    return make_sample(x, std::move(x_mal), AttackKind::Fgsm, eps);
}

MaliciousSample bim(const TargetModel& model, const Tensor& x, int y_true, float eps, float alpha,
                    int iters) {
    if (!(eps >= 0.0f)) throw TensorError("bim: eps must be >= 0");
    if (!(alpha > 0.0f)) throw TensorError("bim: alpha must be > 0");
    if (iters < 0) throw TensorError("bim: iters must be >= 0");
    MaliciousSample s = linf_iterative(model, x, y_true, eps, alpha, iters, Tensor::zeros(x.shape),
                                       AttackKind::Bim);
    return s;
}

MaliciousSample pgd(const TargetModel& model, const Tensor& x, int y_true, float eps, float alpha,
                    int iters, bool random_start, std::uint64_t seed) {
    if (!(eps >= 0.0f)) throw TensorError("pgd: eps must be >= 0");
    if (!(alpha > 0.0f)) throw TensorError("pgd: alpha must be > 0");
    if (iters < 0) throw TensorError("pgd: iters must be >= 0");
    Tensor delta = Tensor::zeros(x.shape);
    if (random_start) {
        Rng rng(seed);
        for (std::int64_t i = 0; i < delta.numel(); ++i) delta[i] = rng.uniform(-eps, eps);
    }
    MaliciousSample s =
        linf_iterative(model, x, y_true, eps, alpha, iters, std::move(delta), AttackKind::Pgd);
    return s;
}

// ---------------------------------------------------------------------------
// JSMA

MaliciousSample jsma(const TargetModel& model, const Tensor& x, int y_target, float theta, float gamma) {
    if (!(gamma > 0.0f && gamma <= 1.0f)) throw TensorError("jsma: gamma must be in (0,1]");
    if (theta == 0.0f) throw TensorError("jsma: theta must be nonzero");
    if (y_target < 0 || y_target >= model.classes()) throw TensorError("jsma: bad target class");

    const std::int64_t d = x.numel();
    const int budget = static_cast<int>(std::ceil(static_cast<double>(gamma) * static_cast<double>(d)));
    Tensor x_adv = x;
    std::vector<char> used(static_cast<size_t>(d), 0);
    int modified = 0;
    while (modified < budget) {
        std::vector<float> z = model.logits(x_adv);
        if (static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()) == y_target) break;
        Tensor grad_t = model.logit_grad(x_adv, y_target);
        Tensor grad_sum = model.logit_sum_grad(x_adv);
        // Saliency over the logit Jacobian: increase features that push the
        // target up while pulling the other classes down in aggregate.
        std::int64_t best = -1;
        float best_score = 0.0f;
        for (std::int64_t i = 0; i < d; ++i) {
            if (used[static_cast<size_t>(i)] || x_adv[i] >= 1.0f) continue;
            const float gt = grad_t[i];
            const float go = grad_sum[i] - gt;
            if (gt <= 0.0f || go >= 0.0f) continue;
            const float score = gt * std::fabs(go);
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best < 0) {
            if (modified == 0) throw NoSaliencyError("jsma: no positive-saliency feature remains");
            break;
        }
        x_adv[best] = clamp01(x_adv[best] + theta);
        used[static_cast<size_t>(best)] = 1;
        ++modified;
    }
    return make_sample(x, std::move(x_adv), AttackKind::Jsma, kNoBound);
}

// ---------------------------------------------------------------------------
// UAP (DeepFool inner step)

namespace {

// Minimal L2 step crossing the nearest linearized decision boundary.
// Returns false when every candidate boundary has a vanishing normal.
bool deepfool_direction(const TargetModel& model, const Tensor& x, int current, Tensor& out) {
    std::vector<float> z = model.logits(x);
    Tensor grad_k = model.logit_grad(x, current);
    double best_dist = 0.0;
    bool found = false;
    Tensor best_w;
    double best_f = 0.0;
    for (int j = 0; j < model.classes(); ++j) {
        if (j == current) continue;
        Tensor w = model.logit_grad(x, j);
        double wnorm2 = 0.0;
        for (std::int64_t i = 0; i < w.numel(); ++i) {
            w[i] -= grad_k[i];
            wnorm2 += static_cast<double>(w[i]) * static_cast<double>(w[i]);
        }
        if (wnorm2 < 1e-20) continue;
        const double f = static_cast<double>(z[static_cast<size_t>(j)]) -
                         static_cast<double>(z[static_cast<size_t>(current)]);
        const double dist = std::fabs(f) / std::sqrt(wnorm2);
        if (!found || dist < best_dist) {
            found = true;
            best_dist = dist;
            best_w = std::move(w);
            best_f = f;
        }
    }
    if (!found) return false;
    double wnorm2 = 0.0;
    for (std::int64_t i = 0; i < best_w.numel(); ++i)
        wnorm2 += static_cast<double>(best_w[i]) * static_cast<double>(best_w[i]);
    const double scale = (std::fabs(best_f) + 1e-4) / wnorm2 * 1.02;
    out = Tensor::zeros(x.shape);
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<float>(scale * static_cast<double>(best_w[i]));
    return true;
}

void project_l2(Tensor& delta, float budget) {
    const double norm = l2_norm(delta);
    if (norm > static_cast<double>(budget) && norm > 0.0) {
        const float k = static_cast<float>(static_cast<double>(budget) / norm);
        for (float& v : delta.data) v *= k;
    }
}

}  // namespace

Tensor uap(const TargetModel& model, const std::vector<const Tensor*>& xs, const std::vector<int>& ys,
           float step, int iters, float budget, int subset, std::uint64_t seed) {
    if (xs.empty()) throw TensorError("uap: empty dataset");
    if (xs.size() != ys.size()) throw TensorError("uap: sample/label count mismatch");
    if (!(budget > 0.0f)) throw TensorError("uap: budget must be > 0");
    Tensor delta = Tensor::zeros(xs.front()->shape);
    if (iters <= 0) return delta;

    const int n = static_cast<int>(xs.size());
    const int take = subset > 0 ? std::min(subset, n) : n;
    bool any_direction = false;
    bool any_fooled = false;
    for (int it = 0; it < iters; ++it) {
        Rng rng(Rng::derive(seed, 0x600 + static_cast<std::uint64_t>(it)));
        std::vector<int> order = rng.permutation(n);
        for (int s = 0; s < take; ++s) {
            const int idx = order[static_cast<size_t>(s)];
            const Tensor& x = *xs[static_cast<size_t>(idx)];
            Tensor x_p = x;
            for (std::int64_t i = 0; i < x.numel(); ++i) x_p[i] = clamp01(x[i] + delta[i]);
            const int pred = model.classify(x_p);
            if (pred != ys[static_cast<size_t>(idx)]) {
                any_fooled = true;
                continue;
            }
            Tensor dir;
            if (!deepfool_direction(model, x_p, pred, dir)) continue;
            any_direction = true;
            for (std::int64_t i = 0; i < delta.numel(); ++i) delta[i] += step * dir[i];
            project_l2(delta, budget);
        }
    }
    if (!any_direction && !any_fooled)
        throw NumericError("uap: no boundary direction found (model constant)");
    delta.require_finite("uap delta");
    return delta;
}

MaliciousSample apply_uap(const Tensor& x, const Tensor& delta) {
    if (!x.same_shape(delta)) throw TensorError("apply_uap: shape mismatch");
    Tensor x_mal = x;
    for (std::int64_t i = 0; i < x.numel(); ++i) x_mal[i] = clamp01(x[i] + delta[i]);
    return make_sample(x, std::move(x_mal), AttackKind::Uap, kNoBound);
}

// ---------------------------------------------------------------------------
// C&W (L2, fixed c)

MaliciousSample cw(const TargetModel& model, const Tensor& x, int y_target, float c, float kappa,
                   int steps, float lr) {
    if (!(c >= 0.0f)) throw TensorError("cw: c must be >= 0");
    if (!(kappa >= 0.0f)) throw TensorError("cw: kappa must be >= 0");
    if (y_target < 0 || y_target >= model.classes()) throw TensorError("cw: bad target class");

    const std::int64_t d = x.numel();
    auto objective = [&](const Tensor& x_adv, double l2) {
        std::vector<float> z = model.logits(x_adv);
        double worst = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < model.classes(); ++j)
            if (j != y_target) worst = std::max(worst, static_cast<double>(z[static_cast<size_t>(j)]));
        const double margin = worst - static_cast<double>(z[static_cast<size_t>(y_target)]);
        return l2 + static_cast<double>(c) * std::max(margin, -static_cast<double>(kappa));
    };

    Tensor delta = Tensor::zeros(x.shape);
    Tensor best_delta = delta;
    double best_obj = objective(x, 0.0);

    for (int t = 0; t < steps; ++t) {
        // Fold the box constraint into delta, then evaluate.
        Tensor x_adv = x;
        double l2sq = 0.0;
        for (std::int64_t i = 0; i < d; ++i) {
            x_adv[i] = clamp01(x[i] + delta[i]);
            delta[i] = x_adv[i] - x[i];
            l2sq += static_cast<double>(delta[i]) * static_cast<double>(delta[i]);
        }
        const double l2 = std::sqrt(l2sq);
        const double obj = objective(x_adv, l2);
        if (obj < best_obj) {
            best_obj = obj;
            best_delta = delta;
        }

        std::vector<float> z = model.logits(x_adv);
        int worst = y_target == 0 ? 1 : 0;
        for (int j = 0; j < model.classes(); ++j)
            if (j != y_target && z[static_cast<size_t>(j)] > z[static_cast<size_t>(worst)]) worst = j;
        const double margin = static_cast<double>(z[static_cast<size_t>(worst)]) -
                              static_cast<double>(z[static_cast<size_t>(y_target)]);

        Tensor grad = Tensor::zeros(x.shape);
        if (l2 > 1e-12)
            for (std::int64_t i = 0; i < d; ++i)
                grad[i] = static_cast<float>(static_cast<double>(delta[i]) / l2);
        if (margin > -static_cast<double>(kappa)) {
            Tensor gw = model.logit_grad(x_adv, worst);
            Tensor gt = model.logit_grad(x_adv, y_target);
            for (std::int64_t i = 0; i < d; ++i) grad[i] += c * (gw[i] - gt[i]);
        }
        for (std::int64_t i = 0; i < d; ++i) delta[i] -= lr * grad[i];
        delta.require_finite("cw delta");
    }

    Tensor x_mal = x;
    for (std::int64_t i = 0; i < d; ++i) x_mal[i] = clamp01(x[i] + best_delta[i]);
    return make_sample(x, std::move(x_mal), AttackKind::Cw, kNoBound);
}

// ---------------------------------------------------------------------------
// BadNet

Trigger Trigger::yellow_box(int channels, int size, int row, int col) {
    Trigger t;
    t.patch = Tensor::zeros({channels, size, size});
    for (int c = 0; c < channels; ++c) {
        const float v = (channels >= 3 && c == 2) ? 0.0f : 1.0f;  // R=G=1, B=0
        for (int i = 0; i < size * size; ++i)
            t.patch[static_cast<std::int64_t>(c) * size * size + i] = v;
    }
    t.row = row;
    t.col = col;
    return t;
}

void Trigger::validate(const std::array<int, 3>& image_shape) const {
    if (patch.rank() != 3) throw TensorError("trigger: patch must be [C,h,w]");
    if (patch.dim(0) != image_shape[0]) throw TensorError("trigger: channel count mismatch");
    if (row < 0 || col < 0 || row + patch.dim(1) > image_shape[1] ||
        col + patch.dim(2) > image_shape[2])
        throw TensorError("trigger: patch out of image bounds");
    for (float v : patch.data)
        if (!(v >= 0.0f && v <= 1.0f)) throw TensorError("trigger: values must be in [0,1]");
}

Tensor badnet_apply(const Tensor& x, const Trigger& trigger) {
    if (x.rank() != 3) throw TensorError("badnet_apply: image must be [C,H,W]");
    trigger.validate({x.dim(0), x.dim(1), x.dim(2)});
    Tensor out = x;
    const int H = x.dim(1), W = x.dim(2);
    const int ph = trigger.patch.dim(1), pw = trigger.patch.dim(2);
    for (int c = 0; c < x.dim(0); ++c)
        for (int i = 0; i < ph; ++i)
            for (int j = 0; j < pw; ++j)
                out[(static_cast<std::int64_t>(c) * H + trigger.row + i) * W + trigger.col + j] =
                    trigger.patch[(static_cast<std::int64_t>(c) * ph + i) * pw + j];
    return out;
}

LabeledDataset badnet_poison(const LabeledDataset& data, const Trigger& trigger, int target_class,
                             float poison_rate, std::uint64_t seed) {
    if (!(poison_rate > 0.0f && poison_rate <= 1.0f))
        throw TensorError("badnet_poison: poison_rate must be in (0,1]");
    if (target_class < 0 || target_class >= data.classes)
        throw TensorError("badnet_poison: target class out of range");
    trigger.validate(data.shape);

    LabeledDataset out = data;
    out.split = data.split + "+poisoned";
    const int n = static_cast<int>(data.size());
    const int k = static_cast<int>(std::floor(static_cast<double>(poison_rate) * n));
    Rng rng(Rng::derive(seed, 0xbad));
    std::vector<int> order = rng.permutation(n);
    for (int i = 0; i < k; ++i) {
        const int idx = order[static_cast<size_t>(i)];
        out.images[static_cast<size_t>(idx)] =
            badnet_apply(data.images[static_cast<size_t>(idx)], trigger);
        out.labels[static_cast<size_t>(idx)] = target_class;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch generation and the NSAB container

std::vector<MaliciousSample> generate_batch(const AttackConfig& cfg, const TargetModel& source,
                                            const TargetModel& scorer, const LabeledDataset& data,
                                            const std::vector<int>& indices, const Trigger* trigger) {
    cfg.validate();
    std::vector<MaliciousSample> out;
    out.reserve(indices.size());

    Tensor delta;
    if (cfg.kind == AttackKind::Uap) {
        std::vector<const Tensor*> xs;
        std::vector<int> ys;
        for (int idx : indices) {
            xs.push_back(&data.images[static_cast<size_t>(idx)]);
            ys.push_back(data.labels[static_cast<size_t>(idx)]);
        }
        delta = uap(source, xs, ys, cfg.uap_step, cfg.iters, cfg.uap_budget, cfg.uap_subset, cfg.seed);
    }
    if (cfg.kind == AttackKind::Badnet && !trigger)
        throw TensorError("generate_batch: badnet requires a trigger");

    for (int idx : indices) {
        const Tensor& x = data.images[static_cast<size_t>(idx)];
        const int y = data.labels[static_cast<size_t>(idx)];
        const int target = (y + 1) % scorer.classes();
        MaliciousSample s;
        switch (cfg.kind) {
            case AttackKind::Fgsm: s = fgsm(source, x, y, cfg.eps); break;
            case AttackKind::Bim: s = bim(source, x, y, cfg.eps, cfg.alpha, cfg.iters); break;
            case AttackKind::Pgd:
                s = pgd(source, x, y, cfg.eps, cfg.alpha, cfg.iters, cfg.random_start,
                        Rng::derive(cfg.seed, static_cast<std::uint64_t>(idx)));
                break;
            case AttackKind::Jsma: s = jsma(source, x, target, cfg.theta, cfg.gamma); break;
            case AttackKind::Uap: s = apply_uap(x, delta); break;
            case AttackKind::Cw:
                s = cw(source, x, target, cfg.cw_c, cfg.cw_kappa, cfg.cw_steps, cfg.cw_lr);
                break;
            case AttackKind::Badnet: {
                Tensor stamped = badnet_apply(x, *trigger);
                s = make_sample(x, std::move(stamped), AttackKind::Badnet, kNoBound);
                break;
            }
        }
        s.index = idx;
        s.success = scorer.classify(s.x_mal) != y;
        out.push_back(std::move(s));
    }
    return out;
}

inline constexpr std::uint32_t kAttackBatchVersion = 1;

void save_attack_batch(const std::string& path, const AttackConfig& cfg,
                       const std::vector<MaliciousSample>& samples, std::uint64_t config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileFormatError("cannot open for writing: " + path);
    BinaryWriter w(os);
    w.bytes("NSAB", 4);
    w.u32(kAttackBatchVersion);
    w.u64(config_hash);
    w.u32(static_cast<std::uint32_t>(cfg.kind));
    w.f32(cfg.eps);
    w.f32(cfg.alpha);
    w.u32(static_cast<std::uint32_t>(cfg.iters));
    w.u8(cfg.random_start ? 1 : 0);
    w.f32(cfg.theta);
    w.f32(cfg.gamma);
    w.f32(cfg.cw_c);
    w.f32(cfg.cw_kappa);
    w.u32(static_cast<std::uint32_t>(cfg.cw_steps));
    w.f32(cfg.cw_lr);
    w.f32(cfg.uap_step);
    w.f32(cfg.uap_budget);
    w.u32(static_cast<std::uint32_t>(cfg.uap_subset));
    w.u64(cfg.seed);
    w.u32(static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : samples) {
        w.u32(static_cast<std::uint32_t>(s.index));
        w.str("eta");
        w.u32(static_cast<std::uint32_t>(s.eta.rank()));
        for (int dm : s.eta.shape) w.u32(static_cast<std::uint32_t>(dm));
        for (float v : s.eta.data) w.f32(v);
        w.u8(s.success ? 1 : 0);
    }
    if (!os) throw FileFormatError("write failed: " + path);
}

AttackBatch load_attack_batch(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileFormatError("cannot open: " + path);
    BinaryReader r(is);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "NSAB", 4) != 0) throw FileFormatError("bad magic, not an NSAB batch: " + path);
    if (r.u32() != kAttackBatchVersion) throw FileFormatError("unsupported attack batch version");
    AttackBatch batch;
    batch.config_hash = r.u64();
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(AttackKind::Badnet))
        throw FileFormatError("attack kind out of range");
    batch.config.kind = static_cast<AttackKind>(kind);
    batch.config.eps = r.f32();
    batch.config.alpha = r.f32();
    batch.config.iters = static_cast<int>(r.u32());
    batch.config.random_start = r.u8() != 0;
    batch.config.theta = r.f32();
    batch.config.gamma = r.f32();
    batch.config.cw_c = r.f32();
    batch.config.cw_kappa = r.f32();
    batch.config.cw_steps = static_cast<int>(r.u32());
    batch.config.cw_lr = r.f32();
    batch.config.uap_step = r.f32();
    batch.config.uap_budget = r.f32();
    batch.config.uap_subset = static_cast<int>(r.u32());
    batch.config.seed = r.u64();
    const std::uint32_t count = r.u32();
    batch.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        MaliciousSample s;
        s.kind = batch.config.kind;
        s.index = static_cast<int>(r.u32());
        const std::string name = r.str();
        if (name != "eta") throw FileFormatError("unexpected record name in attack batch");
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw FileFormatError("eta rank out of range");
        std::vector<int> shape(rank);
        for (auto& dm : shape) dm = static_cast<int>(r.u32());
        const std::int64_t n = shape_numel(shape);
        std::vector<float> vals(static_cast<size_t>(n));
        for (auto& v : vals) v = r.f32();
        s.eta = Tensor::from(std::move(shape), std::move(vals));
        s.success = r.u8() != 0;
        batch.samples.push_back(std::move(s));
    }
    return batch;
}

}  // namespace noisec::attacks
