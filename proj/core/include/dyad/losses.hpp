#pragma once

#include <vector>

#include "dyad/tape.hpp"

namespace dyad {

// Mean of squared elementwise differences; m is the total element count.
Value mse(Value a, Value b);

// MSE(H^e, H^r) + MSE(H^r, H^e), kept as the sum of both terms.
Value kd_loss(Value h_e, Value h_r);

// Softened probability vector: softmax over the representation's
// elements. A 1xN row is one distribution; a WxD matrix is softened per
// feature channel along time.
Value seq_softmax_prob(Value h);

// KL(P_a || P_b), summed over all distributions in the input. Inputs must
// already be normalized (sums within 1e-6 of 1).
Value kl_div(Value p_a, Value p_b);

// KL(P(H^{e->r}), P(H^e)) + KL(P(H^{r->e}), P(H^r)).
Value se_loss(Value h_er, Value h_e, Value h_re, Value h_r);

// MSE(C_p, C_l) + MSE(W_p, W_l) over a batch of scalar predictions.
Value task_loss(Value pred_c, Value pred_w, Value label_c, Value label_w);

struct LossBreakdown {
    double task = 0.0;
    double kd = 0.0;
    double se = 0.0;
    double total = 0.0;
    bool kd_on = true;
    bool se_on = true;
};

// Lin's concordance correlation coefficient, population moments.
// Conventions for degenerate input: both series constant and equal -> 1,
// both constant and unequal -> 0.
double ccc(const std::vector<double>& pred, const std::vector<double>& label);

}  // namespace dyad
