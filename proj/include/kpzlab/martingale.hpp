#pragma once

#include <string>
#include <vector>

#include "kpzlab/fields.hpp"
#include "kpzlab/measures.hpp"

namespace kpzlab {

struct Centering {
  double rho = 0.0;
  double phi_b = 0.0, phi1_b = 0.0, phi2_b = 0.0;
  double phi_c = 0.0, phi1_c = 0.0;
};
// Tilted means of b and c at the measure's density.
Centering centering(const ModelSpec& spec, int n, const MeasureSpec& measure);

// Y_t = Y_0 + I + B + K + M along one trajectory, with the test function in the floor frame.
// Records under "<prefix>/<term>" for term in Y, Y0, I, B, K, M, M_direct, QV, QV_path.
class DecompositionObserver : public Observer {
 public:
  DecompositionObserver(std::string prefix, TestFunction H, const Centering& centering, const Asymmetry& asym);

  void start(const KmcEngine& engine) override;
  void on_jump(const Jump& jump, const KmcEngine& engine) override;
  void advance(double t, const KmcEngine& engine) override;
  void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) override;
  bool tracks_events() const override { return true; }

  struct Terms {
    double Y = 0, Y0 = 0, I = 0, B = 0, K = 0, M = 0, M_direct = 0, QV = 0, QV_path = 0;
  };
  Terms terms() const;
  // Predicted d<M>/dt from the running sums, and the same quantity summed bond by bond.
  double qv_integrand() const;
  double qv_direct(const KmcEngine& engine) const;
  long long shift() const noexcept { return shift_; }

 private:
  void set_shift(long long k, const KmcEngine& engine);
  void recompute_sums(const KmcEngine& engine);
  void integrate_to(double t, const KmcEngine& engine);
  double lf() const;
  double i_int() const;
  double b_int() const;

  std::string prefix_;
  TestFunction H_;
  Centering cen_;
  Asymmetry asym_;
  Frame frame_;
  double A_ = 0.0;
  std::vector<double> b_, c_;
  std::vector<double> h_, grad_, lap_, g2_, dg2_;
  double sum_lap_ = 0, sum_grad_ = 0;
  double S_c_ = 0, S_b_ = 0, S_eta_ = 0, S_F_ = 0, Q_b_ = 0, Q_c_ = 0;
  double Y0_ = 0, I_ = 0, B_ = 0, Kd_ = 0, steps_ = 0, LF_ = 0, jumps_ = 0, QV_ = 0, QV_path_ = 0;
  long long shift_ = 0;
  double t_last_ = 0.0;
  std::uint64_t since_refresh_ = 0;
};

// Time integrals of sum_x h(x) tau_x f against block-density replacements, for each ell:
//   "<prefix>/second/<ell>": int sum h [tau_x f - (phi''/2){(eta^(ell)(x) - rho)^2 - sigma2_ell/(2 ell + 1)}]
//   "<prefix>/first/<ell>":  int sum h [tau_x f - phi' (eta^(ell)(x) - rho)]
//   "<prefix>/raw":          int sum h tau_x f
class BgObserver : public Observer {
 public:
  BgObserver(std::string prefix, LocalFunction f, std::vector<double> h, double rho, double phi1, double phi2,
             std::vector<int> ells, std::vector<double> sigma2_ell);

  void start(const KmcEngine& engine) override;
  void on_jump(const Jump& jump, const KmcEngine& engine) override;
  void advance(double t, const KmcEngine& engine) override;
  void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) override;
  bool tracks_events() const override { return true; }

 private:
  void integrate_to(double t);
  void move_block(std::size_t k, int x, int delta);

  std::string prefix_;
  LocalFunction f_;
  std::vector<double> h_;
  double rho_, phi1_, phi2_;
  std::vector<int> ells_;
  std::vector<double> sigma2_;
  double sum_h_ = 0.0;
  std::vector<double> fval_;
  double F_ = 0.0;
  std::vector<std::vector<int>> block_;
  std::vector<double> Q1_, Q2_;
  double raw_ = 0.0;
  std::vector<double> first_, second_;
  double t_last_ = 0.0;
  int L_ = 0;
};

// Lattice weights grad^n_x H = n (H((x+1)/n) - H(x/n)) on the ring, nearest image.
std::vector<double> lattice_gradient(const TestFunction& H, int n, int L);
// Lattice samples scale * H(x/n) on the ring, nearest image.
std::vector<double> lattice_samples(const TestFunction& H, int n, int L, double scale = 1.0);

struct BgBound {
  double first_term = 0.0;   // t ell / n * (1/n) sum h^2     (second-order variant)
  double second_term = 0.0;  // t^2 n^2 / ell^{2+alpha0} * ((1/n) sum |h|)^2
  double total() const { return first_term + second_term; }
};
// Bound shape without the constant; first_order switches to t ell^2/n and ell^{1+alpha0}.
BgBound bg_bound(std::span<const double> h, int n, int ell, double t, double alpha0, bool first_order = false);

struct BgVariance {
  double lhs = 0.0;
  double se = 0.0;
  double bound = 0.0;
};
BgVariance bg_variance(std::span<const double> integrals, std::span<const double> h, int n, int ell, double t,
                       double alpha0, bool first_order = false);

}  // namespace kpzlab
