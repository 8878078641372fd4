#include "wordimp/nn/recurrent.hpp"

namespace wordimp {
namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& a) { return 1.0 / (1.0 + (-a).exp()); }

}  // namespace

Eigen::MatrixXd reverse_columns(const Eigen::MatrixXd& m) { return m.rowwise().reverse(); }

Eigen::VectorXd gru_forward(const ModelParameters::Recurrent& p, const Eigen::MatrixXd& x,
                            GruTrace* trace) {
  const Eigen::Index hid = p.U.value.cols();
  const Eigen::Index n = x.cols();
  const Eigen::MatrixXd pre = (p.W.value * x).colwise() + p.b.value.col(0);
  const auto Uz = p.U.value.topRows(hid);
  const auto Ur = p.U.value.middleRows(hid, hid);
  const auto Un = p.U.value.bottomRows(hid);

  if (trace) {
    trace->x = x;
    trace->h.resize(hid, n + 1);
    trace->h.col(0).setZero();
    trace->z.resize(hid, n);
    trace->r.resize(hid, n);
    trace->n.resize(hid, n);
  }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hid);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::ArrayXd z = sigmoid(pre.col(t).head(hid) + Uz * h);
    const Eigen::ArrayXd r = sigmoid(pre.col(t).segment(hid, hid) + Ur * h);
    const Eigen::VectorXd rh = (r * h.array()).matrix();
    const Eigen::ArrayXd cand = (pre.col(t).tail(hid) + Un * rh).array().tanh();
    h = ((1.0 - z) * cand + z * h.array()).matrix();
    if (trace) {
      trace->z.col(t) = z;
      trace->r.col(t) = r;
      trace->n.col(t) = cand;
      trace->h.col(t + 1) = h;
    }
  }
  return h;
}

Eigen::MatrixXd gru_backward(ModelParameters::Recurrent& p, const GruTrace& tr,
                             const Eigen::VectorXd& d_final) {
  const Eigen::Index hid = p.U.value.cols();
  const Eigen::Index n = tr.x.cols();
  const auto Uz = p.U.value.topRows(hid);
  const auto Ur = p.U.value.middleRows(hid, hid);
  const auto Un = p.U.value.bottomRows(hid);

  Eigen::MatrixXd d_pre(3 * hid, n);
  Eigen::VectorXd dh = d_final;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const Eigen::ArrayXd h_prev = tr.h.col(t).array();
    const Eigen::ArrayXd z = tr.z.col(t).array();
    const Eigen::ArrayXd r = tr.r.col(t).array();
    const Eigen::ArrayXd cand = tr.n.col(t).array();
    const Eigen::ArrayXd dha = dh.array();

    const Eigen::VectorXd da_n = (dha * (1.0 - z) * (1.0 - cand.square())).matrix();
    const Eigen::VectorXd da_z = (dha * (h_prev - cand) * z * (1.0 - z)).matrix();
    const Eigen::VectorXd d_rh = Un.transpose() * da_n;
    const Eigen::VectorXd da_r = (d_rh.array() * h_prev * r * (1.0 - r)).matrix();

    p.U.grad.topRows(hid) += da_z * h_prev.matrix().transpose();
    p.U.grad.middleRows(hid, hid) += da_r * h_prev.matrix().transpose();
    p.U.grad.bottomRows(hid) += da_n * (r * h_prev).matrix().transpose();

    dh = (dha * z).matrix() + (d_rh.array() * r).matrix() + Uz.transpose() * da_z +
         Ur.transpose() * da_r;

    d_pre.col(t) << da_z, da_r, da_n;
  }
  p.W.grad += d_pre * tr.x.transpose();
  p.b.grad.col(0) += d_pre.rowwise().sum();
  return p.W.value.transpose() * d_pre;
}

Eigen::MatrixXd lstm_forward(const ModelParameters::Recurrent& p, const Eigen::MatrixXd& x,
                             LstmTrace* trace) {
  const Eigen::Index hid = p.U.value.cols();
  const Eigen::Index steps = x.cols();
  const Eigen::MatrixXd pre = (p.W.value * x).colwise() + p.b.value.col(0);

  if (trace) {
    trace->x = x;
    trace->h.resize(hid, steps + 1);
    trace->c.resize(hid, steps + 1);
    trace->h.col(0).setZero();
    trace->c.col(0).setZero();
    trace->i.resize(hid, steps);
    trace->f.resize(hid, steps);
    trace->g.resize(hid, steps);
    trace->o.resize(hid, steps);
  }
  Eigen::MatrixXd out(hid, steps);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hid);
  Eigen::ArrayXd c = Eigen::ArrayXd::Zero(hid);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::VectorXd a = pre.col(t) + p.U.value * h;
    const Eigen::ArrayXd ig = sigmoid(a.segment(0, hid).array());
    const Eigen::ArrayXd fg = sigmoid(a.segment(hid, hid).array());
    const Eigen::ArrayXd gg = a.segment(2 * hid, hid).array().tanh();
    const Eigen::ArrayXd og = sigmoid(a.segment(3 * hid, hid).array());
    c = fg * c + ig * gg;
    h = (og * c.tanh()).matrix();
    out.col(t) = h;
    if (trace) {
      trace->i.col(t) = ig;
      trace->f.col(t) = fg;
      trace->g.col(t) = gg;
      trace->o.col(t) = og;
      trace->c.col(t + 1) = c;
      trace->h.col(t + 1) = h;
    }
  }
  return out;
}

Eigen::MatrixXd lstm_backward(ModelParameters::Recurrent& p, const LstmTrace& tr,
                              const Eigen::MatrixXd& d_hidden) {
  const Eigen::Index hid = p.U.value.cols();
  const Eigen::Index steps = tr.x.cols();

  Eigen::MatrixXd d_pre(4 * hid, steps);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hid);
  Eigen::ArrayXd dc_next = Eigen::ArrayXd::Zero(hid);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const Eigen::ArrayXd dh = (d_hidden.col(t) + dh_next).array();
    const Eigen::ArrayXd ig = tr.i.col(t).array(), fg = tr.f.col(t).array();
    const Eigen::ArrayXd gg = tr.g.col(t).array(), og = tr.o.col(t).array();
    const Eigen::ArrayXd tc = tr.c.col(t + 1).array().tanh();
    const Eigen::ArrayXd c_prev = tr.c.col(t).array();

    const Eigen::ArrayXd dc = dc_next + dh * og * (1.0 - tc.square());
    d_pre.col(t).segment(0, hid) = (dc * gg * ig * (1.0 - ig)).matrix();
    d_pre.col(t).segment(hid, hid) = (dc * c_prev * fg * (1.0 - fg)).matrix();
    d_pre.col(t).segment(2 * hid, hid) = (dc * ig * (1.0 - gg.square())).matrix();
    d_pre.col(t).segment(3 * hid, hid) = (dh * tc * og * (1.0 - og)).matrix();

    dc_next = dc * fg;
    dh_next = p.U.value.transpose() * d_pre.col(t);
  }
  p.U.grad += d_pre * tr.h.leftCols(steps).transpose();
  p.W.grad += d_pre * tr.x.transpose();
  p.b.grad.col(0) += d_pre.rowwise().sum();
  return p.W.value.transpose() * d_pre;
}

Eigen::MatrixXd bilstm_forward(const ModelParameters& p, const Eigen::MatrixXd& x,
                               LstmTrace* fwd, LstmTrace* bwd) {
  const Eigen::Index hid = p.lstm_fwd.U.value.cols();
  Eigen::MatrixXd out(2 * hid, x.cols());
  out.topRows(hid) = lstm_forward(p.lstm_fwd, x, fwd);
  out.bottomRows(hid) = reverse_columns(lstm_forward(p.lstm_bwd, reverse_columns(x), bwd));
  return out;
}

}  // namespace wordimp
