#ifndef POLARLENS_LOSSES_HPP
#define POLARLENS_LOSSES_HPP

#include <Eigen/Core>

#include <vector>

namespace polarlens {

inline constexpr double kDefaultTemperature = 0.07;

/// Unsupervised contrastive loss over a batch and its re-encoded twin:
///   -(1/B) sum_i log( exp(sim(h_i, ht_i)/tau) / sum_j exp(sim(h_i, ht_j)/tau) )
/// with sim = cosine on the raw rows. B >= 1; the B = 1 batch scores 0.
double simcse_loss(const Eigen::MatrixXd& h, const Eigen::MatrixXd& h_tilde,
                   double tau = kDefaultTemperature);

/// Label-supervised contrastive loss over one batch:
///   -(1/B) sum_i log( sum_{j!=i, y_j=y_i} exp(sim_ij/tau) / sum_{j!=i} exp(sim_ij/tau) )
/// Every anchor needs at least one same-label partner, else the inner log
/// is undefined and this throws.
double supcon_loss(const Eigen::MatrixXd& h, const std::vector<bool>& labels,
                   double tau = kDefaultTemperature);

struct FusionWeights {
    Eigen::MatrixXd w_contrast; // E x E
    double lambda = 0.0;        // 1/sqrt(E)

    static FusionWeights make(Eigen::MatrixXd w);
};

/// Attention readout of token states against a contrastive summary vector:
/// scores s_i = lambda * (tokens_i . (W h_contrast)); a = softmax(s);
/// returns sum_i a_i * tokens_i.
Eigen::VectorXd attention_fuse(const Eigen::MatrixXd& tokens, const Eigen::VectorXd& h_contrast,
                               const FusionWeights& w);

} // namespace polarlens

#endif
