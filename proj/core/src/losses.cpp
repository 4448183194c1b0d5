#include "dyad/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dyad {

Value mse(Value a, Value b) {
    check_same_shape(a.tape->value(a), b.tape->value(b), "mse");
    Value d = sub(a, b);
    double m = static_cast<double>(a.tape->value(a).numel());
    return scale(sum(mul(d, d)), 1.0 / m);
}

Value kd_loss(Value h_e, Value h_r) { return add(mse(h_e, h_r), mse(h_r, h_e)); }

Value seq_softmax_prob(Value h) {
    const Tensor& t = h.tape->value(h);
    if (t.rank() == 1 || t.rows() == 1) return softmax(h, t.rank() - 1);
    return softmax(h, 0);  // per channel along time
}

Value kl_div(Value p_a, Value p_b) {
    const Tensor& a = p_a.tape->value(p_a);
    const Tensor& b = p_b.tape->value(p_b);
    check_same_shape(a, b, "kl_div");
    // Each input must hold normalized distributions.
    int dists = (a.rank() == 1 || a.rows() == 1) ? 1 : a.cols();
    for (const Tensor* t : {&a, &b}) {
        double total = 0.0;
        for (double v : t->data) total += v;
        if (std::abs(total - dists) > 1e-6 * dists)
            throw std::invalid_argument("kl_div: input is not normalized");
    }
    return sum(mul(p_a, sub(log_op(p_a), log_op(p_b))));
}

Value se_loss(Value h_er, Value h_e, Value h_re, Value h_r) {
    Value a = kl_div(seq_softmax_prob(h_er), seq_softmax_prob(h_e));
    Value b = kl_div(seq_softmax_prob(h_re), seq_softmax_prob(h_r));
    return add(a, b);
}

Value task_loss(Value pred_c, Value pred_w, Value label_c, Value label_w) {
    return add(mse(pred_c, label_c), mse(pred_w, label_w));
}

double ccc(const std::vector<double>& pred, const std::vector<double>& label) {
    if (pred.size() != label.size())
        throw std::invalid_argument("ccc: length mismatch");
    size_t n = pred.size();
    if (n < 2) throw std::invalid_argument("ccc: need at least 2 samples");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += pred[i];
        my += label[i];
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = pred[i] - mx, dy = label[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= n;
    vy /= n;
    cov /= n;
    double md = mx - my;
    double denom = vx + vy + md * md;
    if (denom == 0.0) return 1.0;           // both constant and equal
    if (vx == 0.0 && vy == 0.0) return 0.0; // both constant, different means
    return 2.0 * cov / denom;
}

}  // namespace dyad
