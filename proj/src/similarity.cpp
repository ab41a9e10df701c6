#include "neurogrow/similarity.hpp"

#include <cmath>

#include "neurogrow/errors.hpp"

namespace neurogrow {

namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void RegConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("reg.lambda must be nonnegative");
    if (n_iters < 1) throw ConfigError("reg.n_iters must be >= 1");
    if (step_size < 0.0) throw ConfigError("reg.step_size must be nonnegative");
    if (epsilon <= 0.0) throw ConfigError("reg.epsilon must be positive");
}

SimilarityMap similarity_map(const Tensor& neuron_matrix) {
    RowNormalized norm = row_l2_normalize(neuron_matrix);
    SimilarityMap map{matmul(norm.rows, transpose(norm.rows))};
    return map;
}

double mean_offdiag_abs(const SimilarityMap& map) {
    const std::size_t n = map.n();
    if (n < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += std::abs(map.values.at(i, j));
    return s / (static_cast<double>(n) * static_cast<double>(n - 1));
}

ScalarAndGrad similarity_loss_grad(const Tensor& w) {
    const std::size_t n = w.extent(0), d = w.extent(1);
    if (n < 2) throw UsageError("similarity_loss_grad needs at least 2 neurons");

    RowNormalized norm = row_l2_normalize(w);
    const Tensor& u = norm.rows;
    Tensor c = matmul(u, transpose(u));

    ScalarAndGrad out{mean_offdiag_abs(SimilarityMap{c}), Tensor(w.shape())};
    const double coeff = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        if (norm.is_zero[i]) continue;  // zero row: zero similarity, zero gradient
        const double rho = row_norm(w, i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || norm.is_zero[j]) continue;
            const double cij = c.at(i, j);
            // d|c_ij|/dw_i = sign(c_ij) * (u_j - c_ij * u_i) / ||w_i||; the
            // ordered pairs (i,j) and (j,i) contribute equally to row i,
            // hence the factor 2.
            const double s = sign0(cij);
            if (s == 0.0) continue;  // |.| subgradient at 0 taken as 0
            for (std::size_t k = 0; k < d; ++k)
                out.grad.at(i, k) += coeff * 2.0 * s * (u.at(j, k) - cij * u.at(i, k)) / rho;
        }
    }
    return out;
}

PenaltyResult weight_change_penalty(const Tensor& w_current, const LayerSnapshot& snap,
                                    const RegConfig& cfg) {
    PenaltyResult out;
    out.grad = Tensor(w_current.shape());
    const double s_prev = snap.weight_sum_previous;
    if (std::abs(s_prev) <= cfg.epsilon) {
        out.disabled_degenerate_snapshot = true;
        return out;
    }
    const double s_cur = sum(w_current);
    if (s_cur == 0.0) {
        // log|0| is -inf; treat as disabled rather than poisoning the loss.
        out.disabled_degenerate_snapshot = true;
        return out;
    }
    const double log_ratio = std::log(std::abs(s_cur) / (std::abs(s_prev) + cfg.epsilon));
    if (cfg.literal_eq5) {
        out.value = log_ratio;
        const double g = 1.0 / s_cur;  // d log|s| / ds, applied to the all-ones ds/dW
        for (double& v : out.grad.raw()) v = g;
    } else {
        out.value = std::abs(log_ratio);
        const double g = sign0(log_ratio) / s_cur;
        for (double& v : out.grad.raw()) v = g;
    }
    return out;
}

ScalarAndGrad combined_reg_loss(const Tensor& w, const LayerSnapshot& snap,
                                const RegConfig& cfg) {
    ScalarAndGrad out{0.0, Tensor(w.shape())};
    if (cfg.enable_sim_loss && w.extent(0) >= 2) {
        ScalarAndGrad sim = similarity_loss_grad(w);
        out.value += sim.value;
        axpy(out.grad, 1.0, sim.grad);
    }
    if (cfg.enable_weight_penalty) {
        PenaltyResult pen = weight_change_penalty(w, snap, cfg);
        if (!pen.disabled_degenerate_snapshot) {
            out.value += cfg.lambda * pen.value;
            axpy(out.grad, cfg.lambda, pen.grad);
        }
    }
    return out;
}

RegStepResult reg_step(const Tensor& w, const LayerSnapshot& snap, const RegConfig& cfg) {
    cfg.validate();
    RegStepResult out{w, combined_reg_loss(w, snap, cfg).value};

    if (cfg.enable_sim_loss && w.extent(0) >= 2) {
        ScalarAndGrad sim = similarity_loss_grad(out.weights);
        axpy(out.weights, -cfg.step_size, sim.grad);
    }
    if (cfg.enable_weight_penalty) {
        if (cfg.literal_eq5) {
            PenaltyResult pen = weight_change_penalty(out.weights, snap, cfg);
            axpy(out.weights, -cfg.step_size * cfg.lambda, pen.grad);
        } else {
            // The symmetric penalty depends on the weights only through their
            // sum, so its descent step is a uniform shift moving the sum
            // toward the snapshot target. A plain subgradient step oscillates
            // around the |log| kink at the target (and 1/s_cur makes it blow
            // up for small sums), so clamp the shift at the target instead:
            // the clamped move never increases the penalty, and once the sum
            // sits at the target the update is exactly gradient descent on
            // mu_sim projected onto the fixed-sum hyperplane.
            const double s_prev = snap.weight_sum_previous;
            const double t = sum(out.weights);
            if (std::abs(s_prev) > cfg.epsilon && t != 0.0) {
                const double target = sign0(t) * (std::abs(s_prev) + cfg.epsilon);
                const double count = static_cast<double>(out.weights.size());
                const double raw = cfg.step_size * cfg.lambda * count / std::abs(t);
                const double move = sign0(target - t) * std::min(raw, std::abs(target - t));
                const double per_entry = move / count;
                for (double& v : out.weights.raw()) v += per_entry;
            }
        }
    }
    return out;
}

}  // namespace neurogrow
