#include "bec/fourier.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include <fftw3.h>

#include "bec/errors.hpp"

namespace bec {

struct FftPlan::Impl {
  fftw_complex* buffer = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  std::size_t n = 0;
  double scale = 1.0;

  void run(fftw_plan p, Eigen::VectorXcd& v) const {
    std::memcpy(buffer, v.data(), n * sizeof(fftw_complex));
    fftw_execute(p);
    auto* src = reinterpret_cast<cplx*>(buffer);
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = src[i] * scale;
  }
};

FftPlan::FftPlan(const LatticeGeometry& g) : geometry_(g), impl_(std::make_unique<Impl>()) {
  if (g.boundary() != Boundary::periodic)
    throw UnsupportedError("Fourier transform requires a periodic box");
  impl_->n = g.site_count();
  impl_->scale = 1.0 / std::sqrt(static_cast<double>(impl_->n));
  impl_->buffer = fftw_alloc_complex(impl_->n);
  std::vector<int> dims = g.extents();
  impl_->fwd = fftw_plan_dft(g.dimension(), dims.data(), impl_->buffer, impl_->buffer,
                             FFTW_FORWARD, FFTW_ESTIMATE);
  impl_->inv = fftw_plan_dft(g.dimension(), dims.data(), impl_->buffer, impl_->buffer,
                             FFTW_BACKWARD, FFTW_ESTIMATE);
}

FftPlan::~FftPlan() {
  if (impl_) {
    fftw_destroy_plan(impl_->fwd);
    fftw_destroy_plan(impl_->inv);
    fftw_free(impl_->buffer);
  }
}

void FftPlan::forward(Eigen::VectorXcd& v) {
  if (static_cast<std::size_t>(v.size()) != impl_->n) throw DimensionError("FFT length mismatch");
  impl_->run(impl_->fwd, v);
}

void FftPlan::inverse(Eigen::VectorXcd& v) {
  if (static_cast<std::size_t>(v.size()) != impl_->n) throw DimensionError("FFT length mismatch");
  impl_->run(impl_->inv, v);
}

Eigen::VectorXd dispersion_table(const LatticeGeometry& g) {
  const auto& ext = g.extents();
  const std::size_t d = ext.size();
  std::vector<std::vector<double>> axis(d);
  for (std::size_t a = 0; a < d; ++a) {
    axis[a].resize(static_cast<std::size_t>(ext[a]));
    for (int m = 0; m < ext[a]; ++m)
      axis[a][static_cast<std::size_t>(m)] =
          2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * m / ext[a]));
  }
  Eigen::VectorXd w(static_cast<Eigen::Index>(g.site_count()));
  std::vector<int> idx(d, 0);
  for (std::size_t i = 0; i < g.site_count(); ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a) s += axis[a][static_cast<std::size_t>(idx[a])];
    w[static_cast<Eigen::Index>(i)] = s;
    for (std::size_t a = d; a-- > 0;) {
      if (++idx[a] < ext[a]) break;
      idx[a] = 0;
    }
  }
  return w;
}

ComplexField fourier_transform(const ComplexField& f, FourierDirection dir) {
  FftPlan plan(f.geometry());
  Eigen::VectorXcd v = f.values();
  if (dir == FourierDirection::forward)
    plan.forward(v);
  else
    plan.inverse(v);
  return ComplexField(f.geometry(), std::move(v));
}

}  // namespace bec
