#include "kpzlab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace kpzlab {

namespace {

// Probabilists' Hermite polynomials He_0..He_4.
double he(int k, double r) {
  switch (k) {
    case 0: return 1.0;
    case 1: return r;
    case 2: return r * r - 1.0;
    case 3: return r * (r * r - 3.0);
    case 4: return (r * r - 6.0) * r * r + 3.0;
    default: throw std::out_of_range("derivative order above 4");
  }
}

// d^k/du^k exp(-((u-c)/w)^2 / 2)
double gauss_derivative(int k, double u, double c, double w) {
  const double r = (u - c) / w;
  const double sign = (k % 2) ? -1.0 : 1.0;
  return sign * std::pow(w, -k) * he(k, r) * std::exp(-0.5 * r * r);
}

template <class F>
double simpson(F f, double a, double b, int N) {
  if (N % 2) ++N;
  const double h = (b - a) / N;
  double s = f(a) + f(b);
  for (int i = 1; i < N; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TestFunction TestFunction::gaussian_bump(double center, double width, double amplitude) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_bump: width must be positive");
  TestFunction t;
  t.kind_ = Kind::GaussianBump;
  t.center_ = center;
  t.width_ = width;
  t.amplitude_ = amplitude;
  t.radius_ = 9.0 * width;
  return t;
}

TestFunction TestFunction::hermite(int z, double center, double scale, double amplitude) {
  if (z < 0) throw std::invalid_argument("hermite: negative degree");
  if (!(scale > 0.0)) throw std::invalid_argument("hermite: scale must be positive");
  TestFunction t;
  t.kind_ = Kind::Hermite;
  t.z_ = z;
  t.center_ = center;
  t.width_ = scale;
  t.amplitude_ = amplitude;
  t.basis_ = std::make_shared<const HermiteBasis>(z + 4);
  t.radius_ = scale * HermiteBasis::support_radius(z + 4);
  return t;
}

TestFunction TestFunction::tabulated(std::vector<double> samples, double u0, double du) {
  if (samples.empty()) throw std::invalid_argument("tabulated: no samples");
  if (!(du > 0.0)) throw std::invalid_argument("tabulated: grid step must be positive");
  TestFunction t;
  t.kind_ = Kind::Tabulated;
  t.u0_ = u0;
  t.du_ = du;
  t.width_ = du;
  t.samples_ = std::move(samples);
  const double u1 = u0 + du * static_cast<double>(t.samples_.size() - 1);
  t.center_ = 0.5 * (u0 + u1);
  t.radius_ = 0.5 * (u1 - u0) + 9.0 * du;
  return t;
}

double TestFunction::derivative(int order, double u) const {
  if (order < 0 || order > 4) throw std::out_of_range("derivative order must be 0..4");
  if (std::abs(u - center_) > radius_) return 0.0;
  switch (kind_) {
    case Kind::GaussianBump:
      return amplitude_ * gauss_derivative(order, u, center_, width_);
    case Kind::Hermite:
      return amplitude_ * std::pow(width_, -order) * basis_->derivative(z_, order, (u - center_) / width_);
    case Kind::Tabulated: {
      const double norm = 1.0 / std::sqrt(2.0 * M_PI);
      const long long lo = std::max<long long>(0, static_cast<long long>(std::floor((u - u0_) / du_ - 9.0)));
      const long long hi = std::min<long long>(static_cast<long long>(samples_.size()) - 1,
                                               static_cast<long long>(std::ceil((u - u0_) / du_ + 9.0)));
      double s = 0.0;
      for (long long j = lo; j <= hi; ++j)
        s += samples_[static_cast<std::size_t>(j)] * gauss_derivative(order, u, u0_ + du_ * j, du_);
      return norm * s;
    }
  }
  return 0.0;
}

double TestFunction::integrate(int order, int power) const {
  const int N = 4000 + (kind_ == Kind::Hermite ? 400 * z_ : 0) +
                (kind_ == Kind::Tabulated ? 20 * static_cast<int>(samples_.size()) : 0);
  return simpson([&](double u) { return std::pow(std::abs(derivative(order, u)), power); }, center_ - radius_,
                 center_ + radius_, N);
}

double TestFunction::l2_norm() const { return std::sqrt(integrate(0, 2)); }
double TestFunction::grad_l1() const { return integrate(1, 1); }
double TestFunction::grad_l2() const { return std::sqrt(integrate(1, 2)); }
double TestFunction::lap_l2() const { return std::sqrt(integrate(2, 2)); }

double TestFunction::sup_gradient() const {
  double m = 0.0;
  const int N = 20000;
  for (int i = 0; i <= N; ++i) m = std::max(m, std::abs(derivative(1, center_ - radius_ + 2.0 * radius_ * i / N)));
  return m;
}

std::string TestFunction::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::GaussianBump: os << "gaussian_bump(center=" << center_ << ", width=" << width_ << ")"; break;
    case Kind::Hermite: os << "hermite(z=" << z_ << ", center=" << center_ << ", scale=" << width_ << ")"; break;
    case Kind::Tabulated: os << "tabulated(" << samples_.size() << " samples, du=" << du_ << ")"; break;
  }
  return os.str();
}

Frame::Frame(const Asymmetry& asym, double phi1_b, Mode mode)
    : velocity_(asym.a * phi1_b * std::pow(static_cast<double>(asym.n), 2.0 - asym.gamma) / 2.0), mode_(mode) {}

double Frame::shift(double t) const {
  if (velocity_ == 0.0) return 0.0;
  const double s = velocity_ * t;
  return mode_ == Mode::Floor ? std::floor(s) : s;
}

std::pair<double, long long> Frame::next_floor_break(long long k) const {
  if (velocity_ > 0.0) return {static_cast<double>(k + 1) / velocity_, k + 1};
  if (velocity_ < 0.0) return {static_cast<double>(k) / velocity_, k - 1};
  return {std::numeric_limits<double>::infinity(), k};
}

// ---------------------------------------------------------------------------------------------

namespace {

constexpr int kPanels = 4096;

double bump(KernelShape shape, double r) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double d = 1.0 - r * r;
  return shape == KernelShape::StandardBump ? std::exp(-1.0 / d) : std::exp(-r * r * r * r / d);
}

}  // namespace

Mollifier::Mollifier(double eps, KernelShape shape, double width_fraction) : eps_(eps), shape_(shape) {
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("mollifier: eps must lie in (0, 1]");
  const double frac = width_fraction > 0.0 ? width_fraction : std::min(0.125, 4.0 * eps * eps);
  if (frac >= 1.0) throw std::invalid_argument("mollifier: bump width must be below eps");
  delta_ = eps * frac;
  using GL = boost::math::quadrature::gauss<double, 15>;
  cum_.assign(kPanels + 1, 0.0);
  const double h = 2.0 / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double a = -1.0 + i * h;
    cum_[static_cast<std::size_t>(i + 1)] =
        cum_[static_cast<std::size_t>(i)] + GL::integrate([&](double r) { return bump(shape_, r); }, a, a + h);
  }
  norm_ = cum_.back();
  for (double& c : cum_) c /= norm_;
}

double Mollifier::cdf(double r) const {
  if (r <= -1.0) return 0.0;
  if (r >= 1.0) return 1.0;
  const double h = 2.0 / kPanels;
  const int i = std::min(kPanels - 1, static_cast<int>((r + 1.0) / h));
  const double a = -1.0 + i * h;
  using GL = boost::math::quadrature::gauss<double, 15>;
  const double part = GL::integrate([&](double s) { return bump(shape_, s); }, a, r);
  return cum_[static_cast<std::size_t>(i)] + part / norm_;
}

double Mollifier::operator()(double z) const {
  if (std::abs(z) >= eps_ + delta_) return 0.0;
  return (cdf((z + eps_) / delta_) - cdf((z - eps_) / delta_)) / (2.0 * eps_);
}

double Mollifier::l2_norm_sq() const {
  using GL = boost::math::quadrature::gauss<double, 15>;
  const double S = support();
  const double pts[] = {-S, -eps_ + delta_, eps_ - delta_, S};
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const int panels = 256;
    const double h = (pts[k + 1] - pts[k]) / panels;
    for (int i = 0; i < panels; ++i)
      s += GL::integrate([&](double z) { const double g = (*this)(z); return g * g; }, pts[k] + i * h,
                         pts[k] + (i + 1) * h);
  }
  return s;
}

double Mollifier::distance_to_iota() const {
  using GL = boost::math::quadrature::gauss<double, 15>;
  const double pts[] = {-eps_ - delta_, -eps_, -eps_ + delta_, eps_ - delta_, eps_, eps_ + delta_};
  double s = 0.0;
  for (int k = 0; k < 5; ++k) {
    if (k == 2) continue;  // G = iota exactly on the plateau
    const int panels = 256;
    const double h = (pts[k + 1] - pts[k]) / panels;
    for (int i = 0; i < panels; ++i)
      s += GL::integrate([&](double z) { const double d = (*this)(z) - iota(z); return d * d; }, pts[k] + i * h,
                         pts[k] + (i + 1) * h);
  }
  return std::sqrt(s);
}

std::vector<double> Mollifier::lattice(int n) const {
  if (eps_ * n < 2.0) throw std::invalid_argument("mollifier: eps * n must be at least 2");
  const int D = static_cast<int>(std::floor(support() * n));
  std::vector<double> g(static_cast<std::size_t>(2 * D + 1));
  for (int d = -D; d <= D; ++d) g[static_cast<std::size_t>(d + D)] = (*this)(static_cast<double>(d) / n);
  return g;
}

// ---------------------------------------------------------------------------------------------

double fluctuation_field(const Configuration& config, const TestFunction& H, const Frame& frame, double t,
                         double rho, int n) {
  const int L = config.size();
  const double shift = frame.shift(t);
  const double c = shift + n * H.center();
  const double R = n * H.support_radius();
  if (2.0 * R + 1.0 >= L) throw std::invalid_argument("fluctuation_field: test function support wraps the ring");
  const long long first = static_cast<long long>(std::ceil(c - R));
  const long long last = static_cast<long long>(std::floor(c + R));
  double s = 0.0;
  for (long long x = first; x <= last; ++x) s += H((static_cast<double>(x) - shift) / n) * (config[x] - rho);
  return s / std::sqrt(static_cast<double>(n));
}

CurrentHeight current_and_height(const KmcEngine& engine, int x) {
  const int L = engine.size();
  if (x <= -L || x >= L) throw std::out_of_range("current_and_height: site outside one ring turn");
  const auto& cfg = engine.config();
  CurrentHeight r;
  r.current = engine.bond_current(x - 1);
  const long long j0 = engine.bond_current(-1);
  long long s = 0;
  if (x >= 0) {
    for (int y = 0; y < x; ++y) s += cfg[y];
    r.height = static_cast<double>(j0 - s);
  } else {
    for (int y = x; y < 0; ++y) s += cfg[y];
    r.height = static_cast<double>(j0 + s);
  }
  return r;
}

// ---------------------------------------------------------------------------------------------

FieldObserver::FieldObserver(std::vector<std::string> ids, std::vector<TestFunction> functions, Frame frame,
                             double rho, int n)
    : ids_(std::move(ids)), fns_(std::move(functions)), frame_(frame), rho_(rho), n_(n) {
  if (ids_.size() != fns_.size()) throw std::invalid_argument("FieldObserver: id/function count mismatch");
}

void FieldObserver::start(const KmcEngine& engine) {
  for (const auto& H : fns_)
    if (2.0 * n_ * H.support_radius() + 1.0 >= engine.size())
      throw std::invalid_argument("FieldObserver: probe support exceeds the ring");
}

void FieldObserver::record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) {
  for (std::size_t i = 0; i < fns_.size(); ++i)
    out.push_back({0, t, ids_[i], fluctuation_field(engine.config(), fns_[i], frame_, t, rho_, n_)});
}

CurrentObserver::CurrentObserver(std::string id, std::vector<int> sites) : id_(std::move(id)), sites_(std::move(sites)) {}

void CurrentObserver::record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) {
  for (int x : sites_) {
    const auto ch = current_and_height(engine, x);
    out.push_back({0, t, id_ + "/J/" + std::to_string(x), static_cast<double>(ch.current)});
    out.push_back({0, t, id_ + "/h/" + std::to_string(x), ch.height});
  }
}

LocalAverageObserver::LocalAverageObserver(std::string id, LocalFunction f) : id_(std::move(id)), f_(std::move(f)) {}

void LocalAverageObserver::start(const KmcEngine& engine) {
  const int L = engine.size();
  value_.assign(static_cast<std::size_t>(L), 0.0);
  sum_ = 0.0;
  for (int x = 0; x < L; ++x) sum_ += value_[static_cast<std::size_t>(x)] = f_(engine.config(), x);
  integral_ = 0.0;
  t_last_ = engine.time();
}

void LocalAverageObserver::on_jump(const Jump& jump, const KmcEngine& engine) {
  integral_ += sum_ * (jump.time - t_last_);
  t_last_ = jump.time;
  // x whose support meets bond sites {bond, bond + 1}
  const auto& cfg = engine.config();
  const int span = std::min(f_.support.hi - f_.support.lo + 2, engine.size());
  for (int k = 0; k < span; ++k) {
    const int x = cfg.wrap(static_cast<long long>(jump.bond) - f_.support.hi + k);
    double& v = value_[static_cast<std::size_t>(x)];
    const double nv = f_(cfg, x);
    sum_ += nv - v;
    v = nv;
  }
}

void LocalAverageObserver::advance(double t, const KmcEngine&) {
  integral_ += sum_ * (t - t_last_);
  t_last_ = t;
}

void LocalAverageObserver::record(double t, const KmcEngine& engine, std::vector<ProbeRecord>& out) {
  const double avg = t > 0.0 ? integral_ / (t * engine.size()) : sum_ / engine.size();
  out.push_back({0, t, id_, avg});
}

// ---------------------------------------------------------------------------------------------

AEpsObserver::AEpsObserver(std::string prefix, TestFunction H, std::vector<Mollifier> mollifiers, Frame frame,
                           double rho, int n, std::vector<long long> translates)
    : prefix_(std::move(prefix)),
      H_(std::move(H)),
      moll_(std::move(mollifiers)),
      frame_(frame),
      rho_(rho),
      n_(n),
      translates_(std::move(translates)) {
  if (!translates_.empty() && frame_.velocity() != 0.0)
    throw std::invalid_argument("AEpsObserver: translates need a still frame");
  for (const auto& m : moll_) {
    Channel c;
    c.g = m.lattice(n);
    c.D = static_cast<int>(c.g.size() / 2);
    for (int d = -c.D - 1; d <= c.D; ++d) {
      const auto at = [&](int e) { return std::abs(e) <= c.D ? c.g[static_cast<std::size_t>(e + c.D)] : 0.0; };
      if (at(d + 1) != at(d)) c.edge.push_back(d);
    }
    ch_.push_back(std::move(c));
  }
}

void AEpsObserver::set_shift(long long k, int L) {
  shift_ = k;
  w_.assign(static_cast<std::size_t>(L), 0.0);
  const double c = static_cast<double>(k) + n_ * H_.center();
  const double R = n_ * H_.support_radius() + 1.0;
  if (2.0 * R + 1.0 >= L) throw std::invalid_argument("AEpsObserver: test function support wraps the ring");
  const long long first = static_cast<long long>(std::ceil(c - R));
  const long long last = static_cast<long long>(std::floor(c + R));
  for (long long x = first; x <= last; ++x) {
    const double u0 = static_cast<double>(x - k) / n_;
    const double u1 = static_cast<double>(x + 1 - k) / n_;
    long long r = x % L;
    if (r < 0) r += L;
    w_[static_cast<std::size_t>(r)] = n_ * (H_(u1) - H_(u0));
  }
  for (auto& c : ch_) {
    c.s = 0.0;
    for (int x = 0; x < L; ++x) c.s += w_[static_cast<std::size_t>(x)] * c.z[static_cast<std::size_t>(x)] *
                                       c.z[static_cast<std::size_t>(x)];
  }
}

void AEpsObserver::start(const KmcEngine& engine) {
  const int L = engine.size();
  const auto& cfg = engine.config();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
  for (auto& c : ch_) {
    if (2 * c.D + 1 >= L) throw std::invalid_argument("AEpsObserver: mollifier wider than the ring");
    c.z.assign(static_cast<std::size_t>(L), 0.0);
    for (int x = 0; x < L; ++x) {
      double s = 0.0;
      for (int d = -c.D; d <= c.D; ++d) s += c.g[static_cast<std::size_t>(d + c.D)] * (cfg[x + d] - rho_);
      c.z[static_cast<std::size_t>(x)] = s * scale;
    }
    c.integral = 0.0;
    if (!translates_.empty()) {
      c.site_int.assign(static_cast<std::size_t>(L), 0.0);
      c.site_last.assign(static_cast<std::size_t>(L), engine.time());
    }
  }
  t_last_ = engine.time();
  set_shift(static_cast<long long>(frame_.velocity() == 0.0 ? 0.0 : std::floor(frame_.velocity() * t_last_)), L);
}

void AEpsObserver::integrate_to(double t) {
  for (;;) {
    const auto [tb, next] = frame_.next_floor_break(shift_);
    if (!(tb <= t)) break;
    for (auto& c : ch_) c.integral += c.s * (std::max(tb, t_last_) - t_last_) / n_;
    t_last_ = std::max(tb, t_last_);
    set_shift(next, static_cast<int>(w_.size()));
  }
  for (auto& c : ch_) c.integral += c.s * (t - t_last_) / n_;
  t_last_ = t;
}

void AEpsObserver::on_jump(const Jump& jump, const KmcEngine& engine) {
  integrate_to(jump.time);
  const int L = engine.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
  // Rightward from x: dZ[y] = n^{-1/2}(g[x+1-y] - g[x-y]); leftward: -n^{-1/2}(g[x-y] - g[x-1-y]).
  const bool right = jump.from == jump.bond;
  const int base = right ? jump.from : jump.from - 1;
  const double sign = right ? scale : -scale;
  for (auto& c : ch_) {
    for (int d : c.edge) {
      const auto at = [&](int e) { return std::abs(e) <= c.D ? c.g[static_cast<std::size_t>(e + c.D)] : 0.0; };
      long long y = (static_cast<long long>(base) - d) % L;
      if (y < 0) y += L;
      double& z = c.z[static_cast<std::size_t>(y)];
      const double nz = z + sign * (at(d + 1) - at(d));
      if (!c.site_int.empty()) {
        c.site_int[static_cast<std::size_t>(y)] += z * z * (jump.time - c.site_last[static_cast<std::size_t>(y)]);
        c.site_last[static_cast<std::size_t>(y)] = jump.time;
      }
      c.s += w_[static_cast<std::size_t>(y)] * (nz * nz - z * z);
      z = nz;
    }
  }
}

void AEpsObserver::advance(double t, const KmcEngine&) { integrate_to(t); }

void AEpsObserver::record(double t, const KmcEngine&, std::vector<ProbeRecord>& out) {
  const long long L = static_cast<long long>(w_.size());
  for (std::size_t k = 0; k < ch_.size(); ++k) {
    out.push_back({0, t, prefix_ + "/" + std::to_string(k), ch_[k].integral});
    auto& c = ch_[k];
    if (c.site_int.empty()) continue;
    for (long long x = 0; x < L; ++x) {
      c.site_int[static_cast<std::size_t>(x)] += c.z[static_cast<std::size_t>(x)] * c.z[static_cast<std::size_t>(x)] *
                                                 (t - c.site_last[static_cast<std::size_t>(x)]);
      c.site_last[static_cast<std::size_t>(x)] = t;
    }
    for (std::size_t j = 0; j < translates_.size(); ++j) {
      double a = 0.0;
      for (long long x = 0; x < L; ++x) {
        const double w = w_[static_cast<std::size_t>(x)];
        if (w == 0.0) continue;
        long long y = (x + translates_[j]) % L;
        if (y < 0) y += L;
        a += w * c.site_int[static_cast<std::size_t>(y)];
      }
      out.push_back({0, t, prefix_ + "/" + std::to_string(k) + "/" + std::to_string(j), a / n_});
    }
  }
}

double AEpsObserver::direct_integrand(std::size_t k, const KmcEngine& engine) const {
  const auto& c = ch_.at(k);
  const int L = engine.size();
  const auto& cfg = engine.config();
  double s = 0.0;
  for (int x = 0; x < L; ++x) {
    if (w_[static_cast<std::size_t>(x)] == 0.0) continue;
    double z = 0.0;
    for (int d = -c.D; d <= c.D; ++d) z += c.g[static_cast<std::size_t>(d + c.D)] * (cfg[x + d] - rho_);
    z /= std::sqrt(static_cast<double>(n_));
    s += w_[static_cast<std::size_t>(x)] * z * z;
  }
  return s / n_;
}

}  // namespace kpzlab
