#pragma once

#include "weyllab/errors.hpp"
#include "weyllab/models.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace weyllab::detail {

namespace odeint = boost::numeric::odeint;

// Adaptive Runge-Kutta-Fehlberg 7(8) stepping with an explicit step budget.
// The caller drives the loop so that events can be located between steps.
template <class State>
class AdaptiveStepper {
  public:
    explicit AdaptiveStepper(const IntegratorOptions& opts, double direction = 1.0)
        : opts_(opts), stepper_(odeint::make_controlled(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_fehlberg78<State>())),
          dt_(std::copysign(1e-2, direction)) {}

    // Advances (y, t) by one accepted step, never past t_end.
    template <class System>
    void step(System&& sys, State& y, double& t, double t_end) {
        for (;;) {
            if (++steps_ > opts_.max_steps)
                throw IntegrationError("adaptive stepper exceeded its budget of " + std::to_string(opts_.max_steps) +
                                       " steps");
            const double remaining = t_end - t;
            const bool clipped = std::abs(dt_) > std::abs(remaining);
            double dt = clipped ? remaining : dt_;
            const double t_before = t;
            const auto res = stepper_.try_step(sys, y, t, dt);
            if (res == odeint::success) {
                // a clipped step says nothing about the natural step size
                if (!clipped) dt_ = dt;
                if (std::abs(t_end - t) <= 1e-15 * std::max(1.0, std::abs(t_end))) t = t_end;
                return;
            }
            dt_ = dt;
            if (std::abs(dt_) < 1e-14 * std::max(1.0, std::abs(t_before)))
                throw IntegrationError("step size underflow at t=" + std::to_string(t_before));
        }
    }

    std::size_t steps() const { return steps_; }

  private:
    IntegratorOptions opts_;
    decltype(odeint::make_controlled(1.0, 1.0, odeint::runge_kutta_fehlberg78<State>())) stepper_;
    double dt_;
    std::size_t steps_ = 0;
};

template <class State, class System>
State integrate_for(System&& sys, State y, double t_total, const IntegratorOptions& opts) {
    if (t_total == 0.0) return y;
    AdaptiveStepper<State> stepper(opts, t_total);
    double t = 0.0;
    while (t != t_total) stepper.step(sys, y, t, t_total);
    return y;
}

} // namespace weyllab::detail
