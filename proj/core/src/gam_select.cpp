#include "polarlens/gam.hpp"

#include "polarlens/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace polarlens {

namespace {

double model_aic(const GamModel& m, std::size_t n) {
    double rss = m.sigma2 * (static_cast<double>(n) - m.edf);
    rss = std::max(rss, 1e-300); // guard the log for near-perfect fits
    return static_cast<double>(n) * std::log(rss / static_cast<double>(n)) +
           2.0 * (m.edf + 1.0);
}

} // namespace

ForwardSelection forward_select_aic(const std::vector<std::string>& names,
                                    const std::vector<std::vector<double>>& cols,
                                    std::span<const double> y, const GamConfig& config) {
    if (names.size() != cols.size())
        throw domain_error("forward_select_aic: names/columns mismatch");
    const std::size_t n = y.size();

    // Candidates are scored at the floor of the lambda grid, where edf prices
    // the full flexibility granted to each term. AIC on GCV-pretuned fits
    // understates candidate degrees of freedom and lets pure-noise smooths
    // through via their unpenalized linear direction.
    GamConfig score_cfg = config;
    if (!score_cfg.fixed_lambda)
        score_cfg.fixed_lambda = std::pow(10.0, config.lambda_log10_min);

    ForwardSelection sel;
    sel.model = gam_fit({}, {}, y, score_cfg);
    double current_aic = model_aic(sel.model, n);
    sel.trace.push_back({"<intercept>", current_aic, true, ""});

    std::vector<std::size_t> remaining(names.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

    while (!remaining.empty()) {
        struct Candidate {
            bool ok = false;
            double aic = std::numeric_limits<double>::infinity();
            GamModel model;
            std::string note;
        };
        std::vector<Candidate> cands(remaining.size());

        std::vector<std::string> base_names;
        std::vector<std::vector<double>> base_cols;
        for (std::size_t s : sel.selected) {
            base_names.push_back(names[s]);
            base_cols.push_back(cols[s]);
        }
        parallel_chunks(remaining.size(), 1, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                auto trial_names = base_names;
                auto trial_cols = base_cols;
                trial_names.push_back(names[remaining[i]]);
                trial_cols.push_back(cols[remaining[i]]);
                try {
                    cands[i].model = gam_fit(trial_names, trial_cols, y, score_cfg);
                    cands[i].aic = model_aic(cands[i].model, n);
                    cands[i].ok = true;
                } catch (const error& ex) {
                    cands[i].note = ex.what();
                }
            }
        });

        // Drop candidates that cannot be fitted, keeping a note in the trace.
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (!cands[i].ok)
                sel.trace.push_back({names[remaining[i]], 0.0, false,
                                     "fit failed: " + cands[i].note});
            else
                keep.push_back(i);
        }
        if (keep.empty()) break;

        std::size_t best = keep[0];
        for (std::size_t i : keep)
            if (cands[i].aic < cands[best].aic) best = i;
        if (cands[best].aic >= current_aic) break;

        current_aic = cands[best].aic;
        sel.selected.push_back(remaining[best]);
        sel.trace.push_back({names[remaining[best]], current_aic, true, ""});
        sel.model = std::move(cands[best].model);

        std::vector<std::size_t> next_remaining;
        for (std::size_t i = 0; i < remaining.size(); ++i)
            if (i != best && cands[i].ok) next_remaining.push_back(remaining[i]);
        remaining = std::move(next_remaining);
    }

    // The returned model gets the full smoothing search; scoring fits only
    // rank candidates.
    if (!sel.selected.empty()) {
        std::vector<std::string> fin_names;
        std::vector<std::vector<double>> fin_cols;
        for (std::size_t s : sel.selected) {
            fin_names.push_back(names[s]);
            fin_cols.push_back(cols[s]);
        }
        sel.model = gam_fit(fin_names, fin_cols, y, config);
    }
    return sel;
}

} // namespace polarlens
