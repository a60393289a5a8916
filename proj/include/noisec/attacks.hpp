#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisec/dataset.hpp"
#include "noisec/nn.hpp"
#include "noisec/tensor.hpp"

namespace noisec::attacks {

enum class AttackKind { Fgsm, Bim, Pgd, Jsma, Uap, Cw, Badnet };

const char* attack_name(AttackKind k);
AttackKind attack_from_name(const std::string& name);

// What an attack needs from a model: the cross-entropy input gradient,
// logits/confidences, and per-class input gradients for Jacobian-based
// methods. Toy oracles in the tests implement this directly.
class TargetModel {
public:
    virtual ~TargetModel() = default;
    virtual int classes() const = 0;
    virtual std::vector<float> logits(const Tensor& x) const = 0;
    virtual std::vector<float> probs(const Tensor& x) const = 0;
    virtual int classify(const Tensor& x) const = 0;
    // d/dx of cross-entropy(model(x), y_true)
    virtual Tensor loss_grad(const Tensor& x, int y_true) const = 0;
    // d/dx of logit z_cls
    virtual Tensor logit_grad(const Tensor& x, int cls) const = 0;
    // d/dx of sum_j z_j; default composes per-class gradients
    virtual Tensor logit_sum_grad(const Tensor& x) const;
};

// Adapter over a trained classifier.
class ClassifierTarget : public TargetModel {
public:
    explicit ClassifierTarget(const models::Classifier& model) : model_(&model) {}
    int classes() const override { return model_->arch().classes; }
    std::vector<float> logits(const Tensor& x) const override { return model_->run(x).logits; }
    std::vector<float> probs(const Tensor& x) const override { return model_->run(x).probs; }
    int classify(const Tensor& x) const override { return model_->classify(x); }
    Tensor loss_grad(const Tensor& x, int y_true) const override;
    Tensor logit_grad(const Tensor& x, int cls) const override;
    Tensor logit_sum_grad(const Tensor& x) const override;

private:
    const models::Classifier* model_;
};

struct AttackConfig {
    AttackKind kind = AttackKind::Fgsm;
    float eps = 0.05f;       // L-inf budget (FGSM/BIM/PGD)
    float alpha = 0.01f;     // step size (BIM/PGD)
    int iters = 10;          // iterations (BIM/PGD/UAP outer passes)
    bool random_start = false;  // PGD
    float theta = 0.25f;     // JSMA per-feature change
    float gamma = 0.05f;     // JSMA max fraction of features
    float cw_c = 0.5f;       // C&W trade-off
    float cw_kappa = 1.0f;   // C&W confidence margin
    int cw_steps = 60;
    float cw_lr = 0.05f;
    float uap_step = 0.25f;  // L2 length of each aggregated update
    float uap_budget = 2.0f; // L2 projection radius for delta
    int uap_subset = 100;    // samples per outer pass
    std::uint64_t seed = 1;

    void validate() const;
};

// 2D patch stamped onto a fixed anchor; values in [0,1].
struct Trigger {
    Tensor patch;  // [C,h,w]
    int row = 0;
    int col = 0;

    static Trigger yellow_box(int channels, int size, int row, int col);
    void validate(const std::array<int, 3>& image_shape) const;
};

struct MaliciousSample {
    Tensor x_mal;
    Tensor eta;  // x_mal - x_nat, stored so the decomposition is exact
    int index = -1;
    AttackKind kind = AttackKind::Fgsm;
    bool success = false;  // scoring model prediction != ground truth
};

// Gradient-sign attacks. Outputs satisfy x_adv in [0,1]^d and
// ||x_adv - x||_inf <= eps bitwise (a final correction pass nudges any
// coordinate pushed over the budget by f32 rounding).
MaliciousSample fgsm(const TargetModel& model, const Tensor& x, int y_true, float eps);
MaliciousSample bim(const TargetModel& model, const Tensor& x, int y_true, float eps, float alpha,
                    int iters);
MaliciousSample pgd(const TargetModel& model, const Tensor& x, int y_true, float eps, float alpha,
                    int iters, bool random_start, std::uint64_t seed);

// Targeted saliency attack over the logit Jacobian; flips at most
// ceil(gamma*d) features by +theta each (clipped to the box).
MaliciousSample jsma(const TargetModel& model, const Tensor& x, int y_target, float theta, float gamma);

struct NoSaliencyError : NumericError {
    using NumericError::NumericError;
};

// Universal perturbation: aggregates DeepFool-style minimal boundary
// crossings over the sample set, re-projecting onto the L2 budget ball
// after every update. Returns the shared delta.
Tensor uap(const TargetModel& model, const std::vector<const Tensor*>& xs, const std::vector<int>& ys,
           float step, int iters, float budget, int subset, std::uint64_t seed);
MaliciousSample apply_uap(const Tensor& x, const Tensor& delta);

// Carlini-Wagner L2: projected gradient descent on delta for
// ||delta||_2 + c * max(max_{i!=t} z_i - z_t, -kappa), best iterate kept.
MaliciousSample cw(const TargetModel& model, const Tensor& x, int y_target, float c, float kappa,
                   int steps, float lr);

Tensor badnet_apply(const Tensor& x, const Trigger& trigger);
LabeledDataset badnet_poison(const LabeledDataset& data, const Trigger& trigger, int target_class,
                             float poison_rate, std::uint64_t seed);

// Batch generation: attacks are crafted on `source`, success flags are
// evaluated against `scorer` (the white-box/black-box split).
std::vector<MaliciousSample> generate_batch(const AttackConfig& cfg, const TargetModel& source,
                                            const TargetModel& scorer, const LabeledDataset& data,
                                            const std::vector<int>& indices, const Trigger* trigger);

// Attack batch file ("NSAB"): header with kind, config echo and seed, then
// per-sample records (dataset index, eta tensor, success byte).
void save_attack_batch(const std::string& path, const AttackConfig& cfg,
                       const std::vector<MaliciousSample>& samples, std::uint64_t config_hash);
struct AttackBatch {
    AttackConfig config;
    std::vector<MaliciousSample> samples;
    std::uint64_t config_hash = 0;
};
AttackBatch load_attack_batch(const std::string& path);

}  // namespace noisec::attacks
