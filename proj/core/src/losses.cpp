#include "polarlens/losses.hpp"

#include "polarlens/common.hpp"

#include <cmath>

namespace polarlens {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw domain_error(std::string(what) + ": non-finite input");
}

// Row-wise cosine similarity matrix between a and b, in double.
Eigen::MatrixXd cosine_table(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::VectorXd na = a.rowwise().norm();
    Eigen::VectorXd nb = b.rowwise().norm();
    if ((na.array() <= 0.0).any() || (nb.array() <= 0.0).any())
        throw domain_error("contrastive loss: zero-norm row");
    Eigen::MatrixXd sims = a * b.transpose();
    sims.array().colwise() /= na.array();
    sims.array().rowwise() /= nb.transpose().array();
    return sims;
}

// log(sum_j exp(s_j / tau)) over the selected entries, max-shifted.
double log_sum_exp(const Eigen::VectorXd& s, const std::vector<char>& mask, double tau) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (mask[static_cast<std::size_t>(j)]) m = std::max(m, s[j] / tau);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (mask[static_cast<std::size_t>(j)]) acc += std::exp(s[j] / tau - m);
    return m + std::log(acc);
}

} // namespace

double simcse_loss(const Eigen::MatrixXd& h, const Eigen::MatrixXd& h_tilde, double tau) {
    if (h.rows() < 1) throw domain_error("simcse_loss: empty batch");
    if (h.rows() != h_tilde.rows() || h.cols() != h_tilde.cols())
        throw domain_error("simcse_loss: shape mismatch");
    if (tau <= 0.0) throw domain_error("simcse_loss: tau must be positive");
    check_finite(h, "simcse_loss");
    check_finite(h_tilde, "simcse_loss");

    const Eigen::Index b = h.rows();
    Eigen::MatrixXd sims = cosine_table(h, h_tilde);
    std::vector<char> all(static_cast<std::size_t>(b), 1);
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        double denom = log_sum_exp(sims.row(i), all, tau);
        total += sims(i, i) / tau - denom;
    }
    double loss = -total / static_cast<double>(b);
    return loss < 0.0 ? 0.0 : loss; // clip the -0.0 / rounding fringe
}

double supcon_loss(const Eigen::MatrixXd& h, const std::vector<bool>& labels, double tau) {
    const Eigen::Index b = h.rows();
    if (b < 2) throw domain_error("supcon_loss: batch must have >= 2 rows");
    if (static_cast<Eigen::Index>(labels.size()) != b)
        throw domain_error("supcon_loss: labels size mismatch");
    if (tau <= 0.0) throw domain_error("supcon_loss: tau must be positive");
    check_finite(h, "supcon_loss");

    Eigen::MatrixXd sims = cosine_table(h, h);
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        std::vector<char> others(static_cast<std::size_t>(b), 1);
        std::vector<char> positives(static_cast<std::size_t>(b), 0);
        others[static_cast<std::size_t>(i)] = 0;
        bool has_positive = false;
        for (Eigen::Index j = 0; j < b; ++j) {
            if (j == i) continue;
            if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
                positives[static_cast<std::size_t>(j)] = 1;
                has_positive = true;
            }
        }
        if (!has_positive)
            throw domain_error("supcon_loss: anchor " + std::to_string(i) +
                               " has no same-label partner");
        total += log_sum_exp(sims.row(i), positives, tau) - log_sum_exp(sims.row(i), others, tau);
    }
    double loss = -total / static_cast<double>(b);
    return loss < 0.0 ? 0.0 : loss;
}

FusionWeights FusionWeights::make(Eigen::MatrixXd w) {
    if (w.rows() != w.cols() || w.rows() < 1)
        throw domain_error("fusion weights must be a square E x E matrix");
    FusionWeights fw;
    fw.lambda = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    fw.w_contrast = std::move(w);
    return fw;
}

Eigen::VectorXd attention_fuse(const Eigen::MatrixXd& tokens, const Eigen::VectorXd& h_contrast,
                               const FusionWeights& w) {
    if (tokens.rows() < 1) throw domain_error("attention_fuse: need at least one token");
    if (tokens.cols() != h_contrast.size() || tokens.cols() != w.w_contrast.rows())
        throw domain_error("attention_fuse: dimension mismatch");
    check_finite(tokens, "attention_fuse");

    Eigen::VectorXd key = w.w_contrast * h_contrast;
    Eigen::VectorXd scores = w.lambda * (tokens * key);
    double m = scores.maxCoeff();
    Eigen::VectorXd a = (scores.array() - m).exp();
    a /= a.sum();
    return tokens.transpose() * a;
}

} // namespace polarlens
