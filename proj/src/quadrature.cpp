#include "fogd2d/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fogd2d/errors.hpp"

namespace fogd2d {
namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
using Gauss = boost::math::quadrature::gauss<double, 10>;

struct Panel {
    double a, b, value, error;
};

Panel gk21(const std::function<double(double)>& f, double a, double b) {
    const auto& x = Kronrod::abscissa();  // x[0] = 0; Gauss nodes at odd indices
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);

    const double f0 = f(mid);
    double kronrod = wk[0] * f0;
    double gauss = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double fx = f(mid - half * x[i]) + f(mid + half * x[i]);
        kronrod += wk[i] * fx;
        if (i % 2 == 1) gauss += wg[i / 2] * fx;
    }
    return Panel{a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double rel_tol, double abs_tol, int max_panels,
                                    const std::string& label) {
    if (a == b) return {};
    std::vector<Panel> heap{gk21(f, a, b)};
    auto by_error = [](const Panel& l, const Panel& r) { return l.error < r.error; };

    auto totals = [&heap] {
        double v = 0.0, e = 0.0;
        for (const Panel& p : heap) {
            v += p.value;
            e += p.error;
        }
        return std::pair{v, e};
    };

    while (true) {
        auto [value, error] = totals();
        if (!std::isfinite(value)) throw NumericalError(label + ": integrand produced a non-finite value");
        if (error <= std::max(abs_tol, rel_tol * std::abs(value))) {
            return QuadratureResult{value, error, static_cast<int>(heap.size())};
        }
        if (static_cast<int>(heap.size()) >= max_panels) {
            std::ostringstream os;
            os << label << ": quadrature did not converge on [" << a << ", " << b << "] after " << heap.size()
               << " panels (estimate " << value << ", error " << error << ")";
            throw NumericalError(os.str());
        }
        std::pop_heap(heap.begin(), heap.end(), by_error);
        const Panel worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        heap.push_back(gk21(f, worst.a, mid));
        std::push_heap(heap.begin(), heap.end(), by_error);
        heap.push_back(gk21(f, mid, worst.b));
        std::push_heap(heap.begin(), heap.end(), by_error);
    }
}

QuadratureResult integrate_to_infinity(const std::function<double(double)>& f, double a, double scale,
                                       double rel_tol, double abs_tol, int max_panels,
                                       const std::string& label) {
    auto mapped = [&](double t) {
        if (t >= 1.0) return 0.0;
        const double one_minus = 1.0 - t;
        const double u = a + scale * t / one_minus;
        const double jac = scale / (one_minus * one_minus);
        const double v = f(u);
        return v == 0.0 ? 0.0 : v * jac;
    };
    return integrate_adaptive(mapped, 0.0, 1.0, rel_tol, abs_tol, max_panels, label);
}

}  // namespace fogd2d
