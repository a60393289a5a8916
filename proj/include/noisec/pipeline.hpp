#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisec/nn.hpp"
#include "noisec/tensor.hpp"

namespace noisec::pipeline {

enum class DetectorKind { Knn, Gmm, Max, Std };

const char* detector_name(DetectorKind k);
DetectorKind detector_from_name(const std::string& name);

// tau = F(x - A(x)): penultimate-layer features of the reconstruction noise.
std::vector<float> extract_noise_features(const models::Autoencoder& ae,
                                          const models::Classifier& fe, const Tensor& x);
std::vector<std::vector<float>> extract_noise_features_batch(const models::Autoencoder& ae,
                                                             const models::Classifier& fe,
                                                             const std::vector<const Tensor*>& xs);

// Diagonal-covariance Gaussian mixture fitted by EM from seeded random
// responsibilities. Restarts with a new seed when a component collapses.
struct Gmm {
    int components = 0;
    int dim = 0;
    std::vector<double> weights;          // [K]
    std::vector<std::vector<double>> means;  // [K][d]
    std::vector<std::vector<double>> vars;   // [K][d], floored
    std::vector<double> ll_history;       // mean log-likelihood per EM iteration

    double log_likelihood(const std::vector<float>& v) const;
};

struct GmmOptions {
    int components = 10;
    int max_iters = 200;
    double tol = 1e-5;         // stop when mean-LL improvement drops below
    double var_floor = 1e-6;
    int max_restarts = 5;
    std::uint64_t seed = 1;
};

Gmm fit_gmm(const std::vector<std::vector<float>>& data, const GmmOptions& opts);

struct DetectorFitConfig {
    int knn_k = 5;
    GmmOptions gmm;
    std::uint64_t seed = 1;
};

// Anomaly scorer over noise features. Higher score = more anomalous for
// every kind: KNN distance to the k-th neighbor, GMM negative
// log-likelihood, max coordinate, and the coordinate standard deviation.
class Detector {
public:
    static Detector fit(DetectorKind kind, const std::vector<std::vector<float>>& benign_features,
                        const DetectorFitConfig& cfg);

    double score(const std::vector<float>& tau) const;
    std::vector<double> score_batch(const std::vector<std::vector<float>>& taus) const;

    DetectorKind kind() const { return kind_; }
    bool fitted() const { return fitted_; }
    int feature_dim() const { return dim_; }
    const Gmm& gmm() const { return gmm_; }
    const std::vector<std::vector<float>>& knn_points() const { return knn_points_; }
    int knn_k() const { return knn_k_; }

    std::vector<NamedTensor> to_tensors() const;
    static Detector from_tensors(DetectorKind kind, const std::vector<NamedTensor>& tensors);

private:
    DetectorKind kind_ = DetectorKind::Max;
    bool fitted_ = false;
    int dim_ = 0;
    std::vector<std::vector<float>> knn_points_;
    int knn_k_ = 5;
    Gmm gmm_;
};

struct Threshold {
    double theta = 0.0;
    double max_fpr = 0.01;
    std::uint32_t calibration_size = 0;
};

// Smallest score theta with fraction(benign > theta) <= max_fpr, an order
// statistic of the calibration scores.
Threshold calibrate_threshold(const std::vector<double>& benign_scores, double max_fpr);

struct Verdict {
    double score = 0.0;
    bool malicious = false;  // score > theta, strict
};

// Trained AE + feature extractor + fitted detector + calibrated threshold.
struct Bundle {
    models::Autoencoder ae;
    models::Classifier fe;
    Detector detector;
    Threshold threshold;
};

Verdict detect(const Bundle& bundle, const Tensor& x);
std::vector<Verdict> detect_batch(const Bundle& bundle, const std::vector<const Tensor*>& xs);

// Bundle file ("NSBD"): AE checkpoint, classifier checkpoint, detector state
// and the threshold record, each checkpoint embedded as a length-prefixed
// NSCK section.
void save_bundle(const std::string& path, const Bundle& bundle, std::uint64_t config_hash);
Bundle load_bundle(const std::string& path);

}  // namespace noisec::pipeline
