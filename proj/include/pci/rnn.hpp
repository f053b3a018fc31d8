#ifndef PCI_RNN_HPP
#define PCI_RNN_HPP

#include <concepts>
#include <type_traits>
#include <utility>

#include "pci/types.hpp"

namespace pci {

// Non-deduced argument views, so plain matrices bind without naming Scalar.
template <typename Scalar>
using ConstMatrixRef = Eigen::Ref<const MatrixX<std::type_identity_t<Scalar>>>;
template <typename Scalar>
using ConstVectorRef = Eigen::Ref<const VectorX<std::type_identity_t<Scalar>>>;
template <typename Scalar>
using MatrixRef = Eigen::Ref<MatrixX<std::type_identity_t<Scalar>>>;

enum class CellKind { lstm, gru };

// Gate blocks stacked along rows: LSTM (i, f, g, o), GRU (z, r, n).
inline constexpr Index gate_count(CellKind kind) { return kind == CellKind::lstm ? 4 : 3; }

// Read-only view of one recurrent cell's parameters.
//   input_weights  : G*H x D
//   hidden_weights : G*H x H
//   bias           : G*H
template <typename Scalar>
struct CellRef {
  Eigen::Ref<const MatrixX<Scalar>> input_weights;
  Eigen::Ref<const MatrixX<Scalar>> hidden_weights;
  Eigen::Ref<const VectorX<Scalar>> bias;

  Index hidden_dim() const { return hidden_weights.cols(); }
  Index input_dim() const { return input_weights.cols(); }
};

// Gradient accumulators with the same shapes as CellRef.
template <typename Scalar>
struct CellGrad {
  Eigen::Ref<MatrixX<Scalar>> input_weights;
  Eigen::Ref<MatrixX<Scalar>> hidden_weights;
  Eigen::Ref<VectorX<Scalar>> bias;
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return Scalar(1) / (Scalar(1) + (-a).exp());
}

template <std::floating_point Scalar>
Scalar sigmoid(Scalar a) {
  return Scalar(1) / (Scalar(1) + std::exp(-a));
}

template <typename Scalar>
void check_cell_shapes(CellKind kind, const CellRef<Scalar>& cell, Index x_size, Index h_size) {
  const Index h = cell.hidden_dim();
  const Index rows = gate_count(kind) * h;
  if (cell.input_weights.rows() != rows || cell.hidden_weights.rows() != rows || cell.bias.size() != rows) {
    throw Error("cell parameter shapes inconsistent with hidden dimension");
  }
  if (x_size != cell.input_dim()) {
    throw Error("input has " + std::to_string(x_size) + " values, cell expects " + std::to_string(cell.input_dim()));
  }
  if (h_size != h) throw Error("hidden state size mismatch");
}

template <typename Scalar>
struct LstmState {
  VectorX<Scalar> h;
  VectorX<Scalar> c;
};

// i, f, o = sigmoid(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c')
template <typename Scalar>
LstmState<Scalar> lstm_step(const ConstVectorRef<Scalar>& x, const ConstVectorRef<Scalar>& h,
                            const ConstVectorRef<Scalar>& c, const CellRef<Scalar>& cell) {
  check_cell_shapes(CellKind::lstm, cell, x.size(), h.size());
  if (c.size() != h.size()) throw Error("cell state size mismatch");
  const Index n = h.size();
  const VectorX<Scalar> a = cell.input_weights * x + cell.hidden_weights * h + cell.bias;
  const auto i = sigmoid(a.segment(0, n).array());
  const auto f = sigmoid(a.segment(n, n).array());
  const auto g = a.segment(2 * n, n).array().tanh();
  const auto o = sigmoid(a.segment(3 * n, n).array());
  LstmState<Scalar> next;
  next.c = (f * c.array() + i * g).matrix();
  next.h = (o * next.c.array().tanh()).matrix();
  return next;
}

// z, r = sigmoid(.), n = tanh(W_n x + b_n + r * (U_n h)), h' = (1 - z) * n + z * h
template <typename Scalar>
VectorX<Scalar> gru_step(const ConstVectorRef<Scalar>& x, const ConstVectorRef<Scalar>& h,
                         const CellRef<Scalar>& cell) {
  check_cell_shapes(CellKind::gru, cell, x.size(), h.size());
  const Index n = h.size();
  const VectorX<Scalar> wx = cell.input_weights * x + cell.bias;
  const VectorX<Scalar> uh = cell.hidden_weights * h;
  const auto z = sigmoid((wx.segment(0, n) + uh.segment(0, n)).array());
  const auto r = sigmoid((wx.segment(n, n) + uh.segment(n, n)).array());
  const auto cand = (wx.segment(2 * n, n).array() + r * uh.segment(2 * n, n).array()).tanh();
  return ((Scalar(1) - z) * cand + z * h.array()).matrix();
}

// Activations of one direction over a whole sequence, stored by step.
template <typename Scalar>
struct DirectionTrace {
  MatrixX<Scalar> gates;       // G*H x T, post-activation
  MatrixX<Scalar> hidden;      // H x (T+1), column 0 is the zero initial state
  MatrixX<Scalar> cell;        // H x (T+1), LSTM only
  MatrixX<Scalar> recurrent;   // H x T, GRU only: U_n h_{s-1} before the reset gate

  VectorX<Scalar> final_hidden() const { return hidden.col(hidden.cols() - 1); }
};

// Runs a cell over the columns of `inputs` (D x T), left to right or reversed,
// from zero initial state.
template <typename Scalar>
DirectionTrace<Scalar> run_direction(CellKind kind, const CellRef<Scalar>& cell,
                                     const ConstMatrixRef<Scalar>& inputs, bool reversed) {
  const Index steps = inputs.cols();
  if (steps < 1) throw Error("empty input sequence");
  const Index n = cell.hidden_dim();
  check_cell_shapes(kind, cell, inputs.rows(), n);

  DirectionTrace<Scalar> trace;
  trace.gates.resize(gate_count(kind) * n, steps);
  trace.hidden = MatrixX<Scalar>::Zero(n, steps + 1);
  if (kind == CellKind::lstm) trace.cell = MatrixX<Scalar>::Zero(n, steps + 1);
  else trace.recurrent.resize(n, steps);

  for (Index s = 0; s < steps; ++s) {
    const Index t = reversed ? steps - 1 - s : s;
    const auto h_prev = trace.hidden.col(s);
    if (kind == CellKind::lstm) {
      VectorX<Scalar> a = cell.input_weights * inputs.col(t) + cell.hidden_weights * h_prev + cell.bias;
      a.segment(0, 2 * n) = sigmoid(a.segment(0, 2 * n).array()).matrix();
      a.segment(2 * n, n) = a.segment(2 * n, n).array().tanh().matrix();
      a.segment(3 * n, n) = sigmoid(a.segment(3 * n, n).array()).matrix();
      trace.cell.col(s + 1) = (a.segment(n, n).array() * trace.cell.col(s).array() +
                               a.segment(0, n).array() * a.segment(2 * n, n).array()).matrix();
      trace.hidden.col(s + 1) = (a.segment(3 * n, n).array() * trace.cell.col(s + 1).array().tanh()).matrix();
      trace.gates.col(s) = a;
    } else {
      const VectorX<Scalar> wx = cell.input_weights * inputs.col(t) + cell.bias;
      const VectorX<Scalar> uh = cell.hidden_weights * h_prev;
      VectorX<Scalar> g(3 * n);
      g.segment(0, 2 * n) = sigmoid((wx.segment(0, 2 * n) + uh.segment(0, 2 * n)).array()).matrix();
      g.segment(2 * n, n) =
          (wx.segment(2 * n, n).array() + g.segment(n, n).array() * uh.segment(2 * n, n).array()).tanh().matrix();
      trace.recurrent.col(s) = uh.segment(2 * n, n);
      trace.hidden.col(s + 1) = ((Scalar(1) - g.segment(0, n).array()) * g.segment(2 * n, n).array() +
                                 g.segment(0, n).array() * h_prev.array()).matrix();
      trace.gates.col(s) = g;
    }
  }
  return trace;
}

// Backpropagation through time for one direction. `d_final` is dLoss/d(final
// hidden state). Parameter gradients are accumulated into `grad`, input
// gradients into the columns of `d_inputs` (D x T, original time order).
template <typename Scalar>
void backprop_direction(CellKind kind, const CellRef<Scalar>& cell, const ConstMatrixRef<Scalar>& inputs,
                        bool reversed, const DirectionTrace<Scalar>& trace,
                        const ConstVectorRef<Scalar>& d_final, CellGrad<Scalar>& grad,
                        MatrixRef<Scalar> d_inputs) {
  const Index steps = inputs.cols();
  const Index n = cell.hidden_dim();
  VectorX<Scalar> dh = d_final;
  VectorX<Scalar> dc = VectorX<Scalar>::Zero(n);
  VectorX<Scalar> da(gate_count(kind) * n);

  for (Index s = steps - 1; s >= 0; --s) {
    const Index t = reversed ? steps - 1 - s : s;
    const auto x = inputs.col(t);
    const auto h_prev = trace.hidden.col(s);
    const auto gates = trace.gates.col(s);

    if (kind == CellKind::lstm) {
      const auto i = gates.segment(0, n).array();
      const auto f = gates.segment(n, n).array();
      const auto g = gates.segment(2 * n, n).array();
      const auto o = gates.segment(3 * n, n).array();
      const auto c_prev = trace.cell.col(s).array();
      const auto tanh_c = trace.cell.col(s + 1).array().tanh();

      dc.array() += dh.array() * o * (Scalar(1) - tanh_c.square());
      da.segment(0, n) = (dc.array() * g * i * (Scalar(1) - i)).matrix();
      da.segment(n, n) = (dc.array() * c_prev * f * (Scalar(1) - f)).matrix();
      da.segment(2 * n, n) = (dc.array() * i * (Scalar(1) - g.square())).matrix();
      da.segment(3 * n, n) = (dh.array() * tanh_c * o * (Scalar(1) - o)).matrix();

      grad.input_weights.noalias() += da * x.transpose();
      grad.hidden_weights.noalias() += da * h_prev.transpose();
      grad.bias += da;
      d_inputs.col(t).noalias() += cell.input_weights.transpose() * da;
      dc = (dc.array() * f).matrix();
      dh = cell.hidden_weights.transpose() * da;
    } else {
      const auto z = gates.segment(0, n).array();
      const auto r = gates.segment(n, n).array();
      const auto cand = gates.segment(2 * n, n).array();
      const auto u_n = trace.recurrent.col(s).array();

      const auto d_cand = (dh.array() * (Scalar(1) - z) * (Scalar(1) - cand.square())).eval();
      da.segment(0, n) = (dh.array() * (h_prev.array() - cand) * z * (Scalar(1) - z)).matrix();
      da.segment(n, n) = (d_cand * u_n * r * (Scalar(1) - r)).matrix();
      da.segment(2 * n, n) = d_cand.matrix();
      const VectorX<Scalar> d_un = (d_cand * r).matrix();

      grad.input_weights.noalias() += da * x.transpose();
      grad.bias += da;
      grad.hidden_weights.topRows(2 * n).noalias() += da.segment(0, 2 * n) * h_prev.transpose();
      grad.hidden_weights.bottomRows(n).noalias() += d_un * h_prev.transpose();
      d_inputs.col(t).noalias() += cell.input_weights.transpose() * da;

      VectorX<Scalar> dh_prev = (dh.array() * z).matrix();
      dh_prev.noalias() += cell.hidden_weights.topRows(2 * n).transpose() * da.segment(0, 2 * n);
      dh_prev.noalias() += cell.hidden_weights.bottomRows(n).transpose() * d_un;
      dh = std::move(dh_prev);
    }
  }
}

}  // namespace pci

#endif  // PCI_RNN_HPP
