// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "stressdet/model.hpp"

namespace stressdet {

namespace {

constexpr double kRatioDenomFloor = 1e-6;

// Row-wise softmax Jacobian: dlogit = a .* (da - sum(da .* a)).
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& weights,
                                 const Eigen::MatrixXd& dweights) {
  Eigen::MatrixXd out(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    const double dot = weights.row(i).cwiseProduct(dweights.row(i)).sum();
    out.row(i) = weights.row(i).cwiseProduct(
        dweights.row(i) - Eigen::RowVectorXd::Constant(weights.cols(), dot));
  }
  return out;
}

}  // namespace

void backward(const ModelInput& in, const ModelParameters& p,
              const ModelConfig& cfg, const ForwardCache& cache,
              const Eigen::MatrixXd& dlogits, ModelParameters& grad) {
  // ---- head ----
  const Eigen::MatrixXd dlogits_raw = dlogits.cwiseProduct(cache.mask_out);
  const Eigen::MatrixXd d2 = cache.act2.cwiseProduct(cache.mask2);
  const Eigen::MatrixXd d1 = cache.act1.cwiseProduct(cache.mask1);
  const Eigen::MatrixXd d0 = cache.act0.cwiseProduct(cache.mask0);

  grad.out_w += d2.transpose() * dlogits_raw;
  grad.out_b += dlogits_raw.colwise().sum();
  Eigen::MatrixXd dd2 = dlogits_raw * p.out_w.transpose();

  Eigen::MatrixXd da2 = dd2.cwiseProduct(cache.mask2)
                            .cwiseProduct((1.0 - cache.act2.array().square()).matrix());
  grad.hidden_w2 += d1.transpose() * da2;
  grad.hidden_b2 += da2.colwise().sum();
  Eigen::MatrixXd dd1 = da2 * p.hidden_w2.transpose();

  Eigen::MatrixXd da1 = dd1.cwiseProduct(cache.mask1)
                            .cwiseProduct((1.0 - cache.act1.array().square()).matrix());
  grad.hidden_w1 += d0.transpose() * da1;
  grad.hidden_b1 += da1.colwise().sum();
  Eigen::MatrixXd dd0 = da1 * p.hidden_w1.transpose();

  Eigen::MatrixXd da0 = dd0.cwiseProduct(cache.mask0)
                            .cwiseProduct((1.0 - cache.act0.array().square()).matrix());
  grad.hidden_w0 += cache.ratios.transpose() * da0;
  grad.hidden_b0 += da0.colwise().sum();
  Eigen::MatrixXd dratios = da0 * p.hidden_w0.transpose();

  // ---- differential ratio layer (quotient rule, clamp gates) ----
  const Eigen::MatrixXd& s = cache.pooled;
  const Eigen::Index K = s.rows();
  const Eigen::Index C = s.cols();
  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(K, C);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index c = 0; c < C; ++c) {
      ds(k, c) += dratios(k, c);
      if (k > 0) {
        const double den = std::max(s(k - 1, c), kRatioDenomFloor);
        ds(k, c) += dratios(k, C + c) / den;
        if (s(k - 1, c) > kRatioDenomFloor) {
          ds(k - 1, c) -= dratios(k, C + c) * s(k, c) / (den * den);
        }
      }
      if (k + 1 < K) {
        const double den = std::max(s(k + 1, c), kRatioDenomFloor);
        ds(k, c) += dratios(k, 2 * C + c) / den;
        if (s(k + 1, c) > kRatioDenomFloor) {
          ds(k + 1, c) -= dratios(k, 2 * C + c) * s(k, c) / (den * den);
        }
      }
    }
  }

  if (!cfg.use_attention) {
    return;  // nucleus means are data; nothing upstream is trainable
  }

  // ---- attentions ----
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_k()));

  // Frame level: values are the (F0, intensity) tracks.
  const Eigen::MatrixXd dframe_out = ds.leftCols(2);
  Eigen::MatrixXd datt_frame = dframe_out * in.frame_values.transpose();  // K x T
  Eigen::MatrixXd dlogits_frame = softmax_backward(cache.att_frame, datt_frame);
  Eigen::MatrixXd dkeys_up = dlogits_frame.transpose() * cache.queries * scale;  // T x d_k

  // Undo the frame upsampling: sum frame gradients per sub-phoneme.
  Eigen::MatrixXd dkeys_frame =
      Eigen::MatrixXd::Zero(cache.keys_frame.rows(), cache.keys_frame.cols());
  for (int t = 0; t < in.frame_count(); ++t) {
    dkeys_frame.row(in.frame_to_subphoneme[static_cast<std::size_t>(t)]) +=
        dkeys_up.row(t);
  }

  // Phoneme level: values are the sub-phoneme durations.
  const Eigen::MatrixXd dphone_out = ds.col(2);
  Eigen::MatrixXd datt_phone = dphone_out * in.subphoneme_durations.transpose();
  Eigen::MatrixXd dlogits_phone = softmax_backward(cache.att_phone, datt_phone);
  Eigen::MatrixXd dkeys_phone = dlogits_phone.transpose() * cache.queries * scale;

  // ---- key projections ----
  grad.key_frame_w += cache.h_dropped.transpose() * dkeys_frame;
  grad.key_frame_b += dkeys_frame.colwise().sum();
  grad.key_phone_w += cache.h_dropped.transpose() * dkeys_phone;
  grad.key_phone_b += dkeys_phone.colwise().sum();

  Eigen::MatrixXd dh_dropped = dkeys_frame * p.key_frame_w.transpose() +
                               dkeys_phone * p.key_phone_w.transpose();
  Eigen::MatrixXd dh = dh_dropped.cwiseProduct(cache.gru_mask);

  // ---- GRU backprop through time ----
  const int L = in.subphoneme_count();
  const int G = cfg.gru_units;
  Eigen::RowVectorXd dh_carry = Eigen::RowVectorXd::Zero(G);
  for (int t = L - 1; t >= 0; --t) {
    const Eigen::RowVectorXd dh_total = dh.row(t) + dh_carry;
    const Eigen::RowVectorXd z = cache.gate_z.row(t);
    const Eigen::RowVectorXd r = cache.gate_r.row(t);
    const Eigen::RowVectorXd hc = cache.cand.row(t);
    const Eigen::RowVectorXd h_prev =
        t > 0 ? Eigen::RowVectorXd(cache.h.row(t - 1))
              : Eigen::RowVectorXd(Eigen::RowVectorXd::Zero(G));
    const Eigen::RowVectorXd xt = cache.x.row(t);

    const Eigen::RowVectorXd dz = dh_total.cwiseProduct(hc - h_prev);
    const Eigen::RowVectorXd dhc = dh_total.cwiseProduct(z);
    Eigen::RowVectorXd dh_prev =
        dh_total.cwiseProduct(Eigen::RowVectorXd::Ones(G) - z);

    const Eigen::RowVectorXd da_h =
        dhc.cwiseProduct((1.0 - hc.array().square()).matrix());
    grad.gru_wh += xt.transpose() * da_h;
    grad.gru_uh += (r.cwiseProduct(h_prev)).transpose() * da_h;
    grad.gru_bh += da_h;
    const Eigen::RowVectorXd drh = da_h * p.gru_uh.transpose();
    const Eigen::RowVectorXd dr = drh.cwiseProduct(h_prev);
    dh_prev += drh.cwiseProduct(r);

    const Eigen::RowVectorXd da_z =
        dz.cwiseProduct(z).cwiseProduct(Eigen::RowVectorXd::Ones(G) - z);
    grad.gru_wz += xt.transpose() * da_z;
    grad.gru_uz += h_prev.transpose() * da_z;
    grad.gru_bz += da_z;
    dh_prev += da_z * p.gru_uz.transpose();

    const Eigen::RowVectorXd da_r =
        dr.cwiseProduct(r).cwiseProduct(Eigen::RowVectorXd::Ones(G) - r);
    grad.gru_wr += xt.transpose() * da_r;
    grad.gru_ur += h_prev.transpose() * da_r;
    grad.gru_br += da_r;
    dh_prev += da_r * p.gru_ur.transpose();

    dh_carry = dh_prev;
  }
}

}  // namespace stressdet
