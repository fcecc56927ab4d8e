#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "kpzlab/hermite.hpp"
#include "kpzlab/kmc.hpp"
#include "kpzlab/measures.hpp"
#include "kpzlab/observe.hpp"

namespace kpzlab {

// Test function on the real line, exactly zero beyond center() +- support_radius().
class TestFunction {
 public:
  enum class Kind { GaussianBump, Hermite, Tabulated };

  static TestFunction gaussian_bump(double center, double width, double amplitude = 1.0);
  // u -> amplitude * h_z((u - center) / scale)
  static TestFunction hermite(int z, double center = 0.0, double scale = 1.0, double amplitude = 1.0);
  // Gaussian-smoothed samples on the grid u0 + i du (smoothing width du).
  static TestFunction tabulated(std::vector<double> samples, double u0, double du);

  double operator()(double u) const { return derivative(0, u); }
  double derivative(int order, double u) const;  // order 0..4

  Kind kind() const noexcept { return kind_; }
  double center() const noexcept { return center_; }
  double support_radius() const noexcept { return radius_; }
  // Width, Hermite scale, or grid step.
  double length_scale() const noexcept { return width_; }
  double sup_gradient() const;

  double l2_norm() const;
  double grad_l1() const;
  double grad_l2() const;
  double lap_l2() const;
  std::string describe() const;

 private:
  double integrate(int order, int power) const;

  Kind kind_ = Kind::GaussianBump;
  double center_ = 0.0, width_ = 1.0, amplitude_ = 1.0, radius_ = 0.0;
  int z_ = 0;
  std::shared_ptr<const HermiteBasis> basis_;
  std::vector<double> samples_;
  double u0_ = 0.0, du_ = 1.0;
};

// Characteristic frame: the test function argument moves by velocity() lattice sites per unit
// macro time, either continuously (fractional) or in unit steps (floor).
class Frame {
 public:
  enum class Mode { Floor, Fractional };

  Frame() = default;
  // velocity = a phi'_b(rho) n^{2-gamma} / 2
  Frame(const Asymmetry& asym, double phi1_b, Mode mode);
  static Frame still() { return Frame(); }

  double shift(double t) const;
  double velocity() const noexcept { return velocity_; }
  // First time at which the floor shift leaves k, and the value it takes then.
  std::pair<double, long long> next_floor_break(long long k) const;
  Mode mode() const noexcept { return mode_; }

 private:
  double velocity_ = 0.0;
  Mode mode_ = Mode::Floor;
};

enum class KernelShape { StandardBump, FlatBump };

// Smooth compactly supported approximation of (2 eps)^{-1} 1_{[-eps, eps]}: the box convolved
// with a normalized bump of half-width delta.
class Mollifier {
 public:
  // width_fraction <= 0 selects delta = eps * min(1/8, 4 eps^2).
  explicit Mollifier(double eps, KernelShape shape = KernelShape::StandardBump, double width_fraction = -1.0);

  double operator()(double z) const;
  double iota(double z) const { return std::abs(z) <= eps_ ? 0.5 / eps_ : 0.0; }
  double eps() const noexcept { return eps_; }
  double delta() const noexcept { return delta_; }
  double support() const noexcept { return eps_ + delta_; }
  KernelShape shape() const noexcept { return shape_; }

  double l2_norm_sq() const;
  double distance_to_iota() const;  // ||G - iota||_{L^2}
  // G(d/n) for d = -D..D, D = floor(support * n); index d + D.
  std::vector<double> lattice(int n) const;

 private:
  double cdf(double r) const;

  double eps_, delta_;
  KernelShape shape_;
  std::vector<double> cum_;  // cumulative bump mass at panel edges on [-1, 1]
  double norm_ = 1.0;
};

// n^{-1/2} sum_x H((x - shift(t))/n) (eta(x) - rho), ring-periodized by nearest image.
double fluctuation_field(const Configuration& config, const TestFunction& H, const Frame& frame, double t,
                         double rho, int n);

struct CurrentHeight {
  long long current = 0;  // J_x(t)
  double height = 0.0;
};
// J_x counts net crossings of the bond (x-1, x); the height at x >= 0 is J_0 - sum_{y<x} eta_t(y),
// and for x < 0 it is J_0 + sum_{x<=y<0} eta_t(y).
CurrentHeight current_and_height(const KmcEngine& engine, int x);

// Y_t(H) for several test functions, recorded at probe times under ids name[i].
class FieldObserver : public Observer {
 public:
  FieldObserver(std::vector<std::string> ids, std::vector<TestFunction> functions, Frame frame, double rho, int n);
  void start(const KmcEngine& engine) override;
  void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) override;

 private:
  std::vector<std::string> ids_;
  std::vector<TestFunction> fns_;
  Frame frame_;
  double rho_;
  int n_;
};

class CurrentObserver : public Observer {
 public:
  CurrentObserver(std::string id, std::vector<int> sites);
  void start(const KmcEngine&) override {}
  void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) override;

 private:
  std::string id_;
  std::vector<int> sites_;
};

// Time average of a local function over the whole ring, (1/t) int_0^t (1/L) sum_x tau_x f ds.
class LocalAverageObserver : public Observer {
 public:
  LocalAverageObserver(std::string id, LocalFunction f);
  void start(const KmcEngine& engine) override;
  void on_jump(const Jump& jump, const KmcEngine& engine) override;
  void advance(double t, const KmcEngine& engine) override;
  void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) override;
  bool tracks_events() const override { return true; }

 private:
  std::string id_;
  LocalFunction f_;
  std::vector<double> value_;
  double sum_ = 0.0, integral_ = 0.0, t_last_ = 0.0;
};

// A^{eps}_{0,t}(H) = int_0^t n^{-1} sum_x (grad^n_x H_s) [tau_x Y_s(G_eps)]^2 ds for a family of
// mollifiers on one trajectory. Ids are "<prefix>/<k>" with k the index into mollifiers.
// With a still frame, translates of H by whole lattice offsets are also recorded, as
// "<prefix>/<k>/<j>", from per-site time integrals of the squared local fields.
class AEpsObserver : public Observer {
 public:
  AEpsObserver(std::string prefix, TestFunction H, std::vector<Mollifier> mollifiers, Frame frame, double rho, int n,
               std::vector<long long> translates = {});
  void start(const KmcEngine& engine) override;
  void on_jump(const Jump& jump, const KmcEngine& engine) override;
  void advance(double t, const KmcEngine& engine) override;
  void record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) override;
  bool tracks_events() const override { return true; }

  double integrand(std::size_t k) const { return ch_.at(k).s / n_; }
  long long shift() const noexcept { return shift_; }
  // Integrand recomputed from scratch, for checks.
  double direct_integrand(std::size_t k, const KmcEngine& engine) const;

 private:
  struct Channel {
    std::vector<double> g;  // lattice kernel, index d + D
    int D = 0;
    std::vector<int> edge;  // d with g[d+1] != g[d]
    std::vector<double> z;  // tau_x Y(G) for every ring site
    double s = 0.0, integral = 0.0;
    std::vector<double> site_int, site_last;  // int z(x)^2 ds, kept only with translates
  };
  void integrate_to(double t);
  void set_shift(long long k, int L);

  std::string prefix_;
  TestFunction H_;
  std::vector<Mollifier> moll_;
  Frame frame_;
  double rho_;
  int n_;
  std::vector<Channel> ch_;
  std::vector<double> w_;  // grad^n H at the current shift, per ring site
  std::vector<long long> translates_;
  long long shift_ = 0;
  double t_last_ = 0.0;
};

}  // namespace kpzlab
