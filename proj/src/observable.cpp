#include "lgv/observable.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "lgv/error.hpp"

namespace lgv {

// ---- Polynomial -------------------------------------------------------------------------

Polynomial Polynomial::constant(int n_vars, double c) {
  Polynomial p(n_vars);
  p.add_term(Exponents(n_vars, 0), c);
  return p;
}

Polynomial Polynomial::variable(int n_vars, int i) {
  Polynomial p(n_vars);
  Exponents e(n_vars, 0);
  e[i] = 1;
  p.add_term(e, 1.0);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

void Polynomial::add_term(const Exponents& e, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  r.n_ = std::max(n_, o.n_);
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  Polynomial r(std::max(n_, o.n_));
  for (const auto& [ea, ca] : terms_)
    for (const auto& [eb, cb] : o.terms_) {
      Exponents e(r.n_, 0);
      for (std::size_t k = 0; k < ea.size(); ++k) e[k] += ea[k];
      for (std::size_t k = 0; k < eb.size(); ++k) e[k] += eb[k];
      r.add_term(e, ca * cb);
    }
  return r;
}

Polynomial Polynomial::operator*(double c) const {
  Polynomial r(n_);
  for (const auto& [e, v] : terms_) r.add_term(e, v * c);
  return r;
}

Polynomial Polynomial::pow(int k) const {
  require(k >= 0, "polynomial powers must be non-negative integers");
  Polynomial r = constant(n_, 1.0);
  for (int i = 0; i < k; ++i) r = r * *this;
  return r;
}

Polynomial Polynomial::derivative(int i) const {
  Polynomial r(n_);
  for (const auto& [e, c] : terms_) {
    if (e[i] == 0) continue;
    Exponents f = e;
    f[i] -= 1;
    r.add_term(f, c * e[i]);
  }
  return r;
}

double Polynomial::operator()(const double* x) const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (int k = 0; k < n_; ++k)
      for (int j = 0; j < e[k]; ++j) t *= x[k];
    s += t;
  }
  return s;
}

namespace {

class PolyParser {
 public:
  PolyParser(const std::string& s, int dim, int state_dim) : s_(s), dim_(dim), n_(state_dim) {}

  Polynomial parse() {
    Polynomial p = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::InvalidArgument, "observable '" + s_ + "': " + what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  Polynomial expr() {
    Polynomial p = term();
    for (;;) {
      if (eat('+')) p = p + term();
      else if (eat('-')) p = p - term();
      else return p;
    }
  }
  Polynomial term() {
    Polynomial p = unary();
    for (;;) {
      if (eat('*')) {
        p = p * unary();
      } else if (eat('/')) {
        const Polynomial d = unary();
        if (d.degree() != 0 || d.terms().empty()) error("division only by non-zero constants");
        p = p * (1.0 / d.terms().begin()->second);
      } else {
        return p;
      }
    }
  }
  Polynomial unary() {
    if (eat('-')) return unary() * -1.0;
    if (eat('+')) return unary();
    return power();
  }
  Polynomial power() {
    Polynomial base = atom();
    if (eat('^')) {
      skip();
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      const long k = std::strtol(start, &end, 10);
      if (end == start || k < 0 || k > 64) error("exponent must be an integer in [0, 64]");
      pos_ += static_cast<std::size_t>(end - start);
      return base.pow(static_cast<int>(k));
    }
    return base;
  }
  Polynomial atom() {
    skip();
    if (pos_ >= s_.size()) error("unexpected end of expression");
    if (eat('(')) {
      Polynomial p = expr();
      if (!eat(')')) error("missing ')'");
      return p;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(start, &end);
      pos_ += static_cast<std::size_t>(end - start);
      return Polynomial::constant(n_, v);
    }
    if (c == 'q' || c == 'p' || c == 'z') {
      ++pos_;
      int block = c == 'q' ? 0 : (c == 'p' ? 1 : 2);
      int idx = 1;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        idx = 0;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) idx = idx * 10 + (s_[pos_++] - '0');
      } else if (dim_ != 1) {
        error(std::string("variable '") + c + "' needs an index when d > 1");
      }
      if (idx < 1 || idx > dim_) error("variable index out of range");
      const int var = block * dim_ + idx - 1;
      if (var >= n_) error(std::string("variable '") + c + "' not present in this dynamics");
      return Polynomial::variable(n_, var);
    }
    error("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  int dim_, n_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(const std::string& expr, int dim, int state_dim) {
  return PolyParser(expr, dim, state_dim).parse();
}

// ---- Observable implementations ---------------------------------------------------------

void Observable::Impl::gradient(const double*, double*) const {
  fail(ErrorCode::InvalidArgument, "observable has no analytic gradient");
}
void Observable::Impl::hessian(const double*, double*) const {
  fail(ErrorCode::InvalidArgument, "observable has no analytic Hessian");
}

namespace {

struct PolyImpl final : Observable::Impl {
  Polynomial p;
  std::vector<Polynomial> grad;
  std::vector<Polynomial> hess;
  int n;
  explicit PolyImpl(const Polynomial& poly) : p(poly), n(poly.n_vars()) {
    for (int i = 0; i < n; ++i) grad.push_back(p.derivative(i));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) hess.push_back(grad[i].derivative(j));
  }
  double value(const double* x) const override { return p(x); }
  bool differentiable() const override { return true; }
  void gradient(const double* x, double* g) const override {
    for (int i = 0; i < n; ++i) g[i] = grad[i](x);
  }
  void hessian(const double* x, double* h) const override {
    for (int i = 0; i < n * n; ++i) h[i] = hess[i](x);
  }
};

struct BumpImpl final : Observable::Impl {
  Bump b;
  int n;
  double value(const double* x) const override { return b.value(x); }
  bool differentiable() const override { return true; }
  void gradient(const double* x, double* g) const override {
    std::fill(g, g + n, 0.0);
    b.gradient(x, g);
  }
  void hessian(const double* x, double* h) const override {
    const int d = static_cast<int>(b.center.size());
    std::fill(h, h + n * n, 0.0);
    double tmp[kMaxDim * kMaxDim];
    b.hessian(x, tmp);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) h[i * n + j] = tmp[i * d + j];
  }
};

struct FunctionImpl final : Observable::Impl {
  ScalarField f;
  double value(const double* x) const override { return f(x); }
};

struct ProductImpl final : Observable::Impl {
  Observable a, b;
  int n;
  double value(const double* x) const override { return a(x) * b(x); }
  bool differentiable() const override { return a.differentiable() && b.differentiable(); }
  void gradient(const double* x, double* g) const override {
    std::vector<double> ga(n), gb(n);
    a.gradient(x, ga.data());
    b.gradient(x, gb.data());
    const double va = a(x), vb = b(x);
    for (int i = 0; i < n; ++i) g[i] = ga[i] * vb + va * gb[i];
  }
  void hessian(const double* x, double* h) const override {
    std::vector<double> ga(n), gb(n), ha(n * n), hb(n * n);
    a.gradient(x, ga.data());
    b.gradient(x, gb.data());
    a.hessian(x, ha.data());
    b.hessian(x, hb.data());
    const double va = a(x), vb = b(x);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        h[i * n + j] = ha[i * n + j] * vb + va * hb[i * n + j] + ga[i] * gb[j] + ga[j] * gb[i];
  }
};

struct AffineImpl final : Observable::Impl {
  Observable a, b;  // b may be invalid
  double ca = 1.0, cb = 1.0, shift = 0.0;
  int n;
  double value(const double* x) const override { return ca * a(x) + (b.valid() ? cb * b(x) : 0.0) + shift; }
  bool differentiable() const override { return a.differentiable() && (!b.valid() || b.differentiable()); }
  void gradient(const double* x, double* g) const override {
    a.gradient(x, g);
    for (int i = 0; i < n; ++i) g[i] *= ca;
    if (b.valid()) {
      std::vector<double> gb(n);
      b.gradient(x, gb.data());
      for (int i = 0; i < n; ++i) g[i] += cb * gb[i];
    }
  }
  void hessian(const double* x, double* h) const override {
    a.hessian(x, h);
    for (int i = 0; i < n * n; ++i) h[i] *= ca;
    if (b.valid()) {
      std::vector<double> hb(n * n);
      b.hessian(x, hb.data());
      for (int i = 0; i < n * n; ++i) h[i] += cb * hb[i];
    }
  }
};

struct FlipImpl final : Observable::Impl {
  Observable a;
  std::vector<double> parity;
  int n;
  void map(const double* x, double* y) const {
    for (int i = 0; i < n; ++i) y[i] = parity[i] * x[i];
  }
  double value(const double* x) const override {
    double y[3 * kMaxDim];
    map(x, y);
    return a(y);
  }
  bool differentiable() const override { return a.differentiable(); }
  void gradient(const double* x, double* g) const override {
    double y[3 * kMaxDim];
    map(x, y);
    a.gradient(y, g);
    for (int i = 0; i < n; ++i) g[i] *= parity[i];
  }
  void hessian(const double* x, double* h) const override {
    double y[3 * kMaxDim];
    map(x, y);
    a.hessian(y, h);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h[i * n + j] *= parity[i] * parity[j];
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(' ');
  const auto e = s.find_last_not_of(' ');
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

Observable Observable::polynomial(const Polynomial& p, std::string tag) {
  auto impl = std::make_shared<PolyImpl>(p);
  if (tag.empty()) tag = "poly";
  return Observable(impl, p.n_vars(), std::move(tag));
}

Observable Observable::parse(const std::string& expr, int dim, int state_dim) {
  return polynomial(parse_polynomial(expr, dim, state_dim), trim(expr));
}

Observable Observable::constant(int n_vars, double c) {
  std::ostringstream os;
  os << c;
  return polynomial(Polynomial::constant(n_vars, c), os.str());
}

Observable Observable::coordinate(int n_vars, int i) {
  return polynomial(Polynomial::variable(n_vars, i), "x" + std::to_string(i + 1));
}

Observable Observable::bump(int n_vars, const Bump& b) {
  require(static_cast<int>(b.center.size()) <= n_vars, "bump observable dimension exceeds state dimension");
  auto impl = std::make_shared<BumpImpl>();
  impl->b = b;
  impl->n = n_vars;
  return Observable(impl, n_vars, "bump");
}

Observable Observable::function(int n_vars, ScalarField f, std::string tag) {
  auto impl = std::make_shared<FunctionImpl>();
  impl->f = std::move(f);
  return Observable(impl, n_vars, std::move(tag));
}

Observable Observable::operator*(const Observable& o) const {
  require(n_ == o.n_, "observable product: state dimension mismatch");
  auto impl = std::make_shared<ProductImpl>();
  impl->a = *this;
  impl->b = o;
  impl->n = n_;
  return Observable(impl, n_, "(" + tag_ + ")*(" + o.tag_ + ")");
}

Observable Observable::operator+(const Observable& o) const {
  require(n_ == o.n_, "observable sum: state dimension mismatch");
  auto impl = std::make_shared<AffineImpl>();
  impl->a = *this;
  impl->b = o;
  impl->n = n_;
  return Observable(impl, n_, tag_ + "+" + o.tag_);
}

Observable Observable::scaled(double c) const {
  auto impl = std::make_shared<AffineImpl>();
  impl->a = *this;
  impl->ca = c;
  impl->n = n_;
  std::ostringstream os;
  os << c << "*(" << tag_ << ")";
  return Observable(impl, n_, os.str());
}

Observable Observable::shifted(double c) const {
  auto impl = std::make_shared<AffineImpl>();
  impl->a = *this;
  impl->shift = c;
  impl->n = n_;
  std::ostringstream os;
  os << tag_ << "+" << c;
  return Observable(impl, n_, os.str());
}

Observable Observable::flipped(const std::vector<double>& parity) const {
  require(static_cast<int>(parity.size()) == n_, "parity length must equal the state dimension");
  auto impl = std::make_shared<FlipImpl>();
  impl->a = *this;
  impl->parity = parity;
  impl->n = n_;
  return Observable(impl, n_, "flip(" + tag_ + ")");
}

Observable perturbation_potential(const PerturbationSpec& w, int n_vars) {
  if (!w.is_gradient()) fail(ErrorCode::NonGradientPerturbation, "a general field has no potential W");
  if (w.form == PerturbationForm::potential_bump) return Observable::bump(n_vars, w.as_bump());
  Polynomial p(n_vars);
  for (std::size_t i = 0; i < w.direction.size(); ++i) {
    Polynomial::Exponents e(n_vars, 0);
    e[i] = 1;
    p.add_term(e, w.amplitude * w.direction[i]);
  }
  return Observable::polynomial(p, "W");
}

std::vector<double> momentum_parity(const Model& m) {
  const int d = m.dim();
  std::vector<double> parity(m.state_dim(), 1.0);
  if (m.kind != DynamicsKind::overdamped)
    for (int i = d; i < 2 * d; ++i) parity[i] = -1.0;
  return parity;
}

namespace {

struct GeneratorImpl final : Observable::Impl {
  Model m;
  Observable f;
  double value(const double* x) const override {
    const int d = m.dim(), n = m.state_dim();
    double g[3 * kMaxDim], h[9 * kMaxDim * kMaxDim], force[kMaxDim];
    f.gradient(x, g);
    f.hessian(x, h);
    const Mat& a = m.sigma.a();
    const double tb = 1.0 / m.beta;
    double s = 0.0;
    switch (m.kind) {
      case DynamicsKind::overdamped: {
        m.drift(x, force);
        for (int i = 0; i < d; ++i) {
          s += force[i] * g[i];
          for (int j = 0; j < d; ++j) s += tb * a(i, j) * h[i * n + j];
        }
        break;
      }
      case DynamicsKind::underdamped: {
        m.force(x, force);
        const double* p = x + d;
        for (int i = 0; i < d; ++i) {
          double ap = 0.0;
          for (int j = 0; j < d; ++j) {
            ap += a(i, j) * p[j];
            s += tb * a(i, j) * h[(d + i) * n + d + j];
          }
          s += p[i] * g[i] + (force[i] - ap) * g[d + i];
        }
        break;
      }
      case DynamicsKind::gle_augmented:
      case DynamicsKind::gle_convolution: {
        m.force(x, force);
        const double* p = x + d;
        const double* z = x + 2 * d;
        for (int i = 0; i < d; ++i) {
          s += p[i] * g[i] + (force[i] + z[i]) * g[d + i] - (m.alpha * z[i] + p[i]) * g[2 * d + i];
          s += m.alpha * tb * h[(2 * d + i) * n + 2 * d + i];
        }
        break;
      }
    }
    return s;
  }
};

}  // namespace

Observable apply_generator(const Model& m, const Observable& f) {
  require(f.n_vars() == m.state_dim(), "generator: observable state dimension mismatch");
  require(f.differentiable(), "generator needs an observable with analytic derivatives");
  auto impl = std::make_shared<GeneratorImpl>();
  impl->m = m;
  impl->f = f;
  return Observable(impl, f.n_vars(), "L(" + f.tag() + ")");
}

Observable carre_du_champ(const Model& m, const Observable& g, const Observable& h) {
  require(g.differentiable() && h.differentiable(), "carre du champ needs differentiable observables");
  require(g.n_vars() == m.state_dim() && h.n_vars() == m.state_dim(), "carre du champ: dimension mismatch");
  const int d = m.dim(), n = m.state_dim();
  // Noise acts on block `off` with covariance c·a (c·I for the GLE z block).
  const int off = m.kind == DynamicsKind::overdamped ? 0 : (m.kind == DynamicsKind::underdamped ? d : 2 * d);
  const bool gle = m.kind == DynamicsKind::gle_augmented || m.kind == DynamicsKind::gle_convolution;
  const Mat a = gle ? Mat::Identity(d, d) : m.sigma.a();
  const double c = 2.0 * (gle ? m.alpha : 1.0) / m.beta;
  return Observable::function(
      n,
      [g, h, a, c, d, n, off](const double* x) {
        double gg[3 * kMaxDim], gh[3 * kMaxDim];
        g.gradient(x, gg);
        h.gradient(x, gh);
        double s = 0.0;
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) s += gg[off + i] * a(i, j) * gh[off + j];
        (void)n;
        return c * s;
      },
      "Gamma(" + g.tag() + "," + h.tag() + ")");
}

}  // namespace lgv
