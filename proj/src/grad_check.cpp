#include "ocmae/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ocmae/rng.hpp"

namespace ocmae {

template <class T>
GradCheckReport grad_check_params(const std::function<Tensor<T>()>& loss, const std::vector<Tensor<T>>& params,
                                  const GradCheckOptions& options) {
  GradCheckReport report;
  for (auto p : params) p.zero_grad();
  const Tensor<T> base = loss();
  if (!std::isfinite(static_cast<double>(base.item()))) {
    report.passed = false;
    report.message = "loss is not finite at the base point";
    return report;
  }
  base.backward();

  Rng rng(options.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor<T> p = params[t];
    const std::int64_t n = p.numel();
    std::vector<std::int64_t> coords(static_cast<std::size_t>(n));
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor >= 0 && options.max_coords_per_tensor < n) {
      for (std::int64_t i = 0; i < options.max_coords_per_tensor; ++i)
        std::swap(coords[static_cast<std::size_t>(i)],
                  coords[static_cast<std::size_t>(i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i))))]);
      coords.resize(static_cast<std::size_t>(options.max_coords_per_tensor));
    }
    const std::vector<T> analytic = p.has_grad() ? std::vector<T>(p.grad().begin(), p.grad().end())
                                                 : std::vector<T>(static_cast<std::size_t>(n), T(0));
    for (std::int64_t c : coords) {
      auto& slot = p.mutable_values()[static_cast<std::size_t>(c)];
      const T saved = slot;
      double plus, minus;
      {
        NoGradGuard guard;
        slot = static_cast<T>(saved + options.step);
        plus = static_cast<double>(loss().item());
        slot = static_cast<T>(saved - options.step);
        minus = static_cast<double>(loss().item());
      }
      slot = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = static_cast<double>(analytic[static_cast<std::size_t>(c)]);
      ++report.coordinates_checked;
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        std::ostringstream os;
        os << "non-finite gradient at tensor " << t << " coordinate " << c << " (analytic " << a << ", numeric "
           << numeric << ")";
        report.passed = false;
        report.message = os.str();
        report.worst_tensor = t;
        report.worst_coordinate = c;
        report.max_error = INFINITY;
        return report;
      }
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.floor});
      if (report.worst_coordinate < 0 || err > report.max_error) {
        report.max_error = err;
        report.worst_tensor = t;
        report.worst_coordinate = c;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_error <= options.tolerance;
  std::ostringstream os;
  os << (report.passed ? "passed" : "failed") << ": max error " << report.max_error << " at tensor "
     << report.worst_tensor << " coordinate " << report.worst_coordinate << " (analytic " << report.worst_analytic
     << ", numeric " << report.worst_numeric << ") over " << report.coordinates_checked << " coordinates";
  report.message = os.str();
  return report;
}

template <class T>
GradCheckReport grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, const Tensor<T>& point,
                           const GradCheckOptions& options) {
  Tensor<T> x(point.shape(), std::vector<T>(point.values().begin(), point.values().end()), true);
  return grad_check_params<T>([&] { return f(x); }, {x}, options);
}

template GradCheckReport grad_check_params<float>(const std::function<Tensor<float>()>&,
                                                  const std::vector<Tensor<float>>&, const GradCheckOptions&);
template GradCheckReport grad_check_params<double>(const std::function<Tensor<double>()>&,
                                                   const std::vector<Tensor<double>>&, const GradCheckOptions&);
template GradCheckReport grad_check<float>(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                           const Tensor<float>&, const GradCheckOptions&);
template GradCheckReport grad_check<double>(const std::function<Tensor<double>(const Tensor<double>&)>&,
                                            const Tensor<double>&, const GradCheckOptions&);

}  // namespace ocmae
