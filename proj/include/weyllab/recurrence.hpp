#pragma once

#include "weyllab/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace weyllab {

// Recurrence set S_{T,eps}: points that come back within eps of themselves
// at some time in [t_min, T]. t_min defaults to half the shortest period.
struct RecurrenceSpec {
    double T = 1.0;
    double eps = 0.1;
    std::optional<double> t_min;
    double surrogate_factor = 2.0; // K of the extended-set surrogate S_{T, K eps}

    double window_start(const FlowModel& model) const { return t_min ? *t_min : 0.5 * model.shortest_period(); }
    // Throws DomainError for an empty window or non-positive eps / K < 1.
    void validate(const FlowModel& model) const;
};

struct RecurrenceResult {
    bool recurrent = false;
    std::optional<double> witness; // time in [t_min, T] at which the distance is <= eps
    double min_distance = 0;       // smallest distance seen by the scan
};

// Scans t in [t_min, T] with step eps / (2 v L) (v the model's speed bound,
// L its Lipschitz factor), refining local minima by golden section to 1e-9.
RecurrenceResult is_recurrent(const FlowModel& model, const PhaseState& s, const RecurrenceSpec& spec);

struct RecurrenceEstimate {
    RecurrenceSpec spec;
    double volume = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::size_t samples = 0;
    std::size_t hits = 0;
    std::size_t failed = 0; // samples whose flow could not be computed
    std::uint64_t seed = 0;
};

// 95% Wilson score interval for k successes out of n.
std::pair<double, double> wilson_interval(std::size_t k, std::size_t n);

// Monte-Carlo estimates on the grid eps x T (row-major: cell = i_eps * T.size() + i_T).
// Every cell uses the same sample set, so the table is monotone in eps and T.
// Models with an exact return minimum skip the scan. Deterministic in
// (seed, samples) whatever the number of threads.
std::vector<RecurrenceEstimate> recurrence_grid(const FlowModel& model, const std::vector<double>& eps,
                                                const std::vector<double>& T, std::size_t samples, std::uint64_t seed,
                                                unsigned threads = 0, std::optional<double> t_min = std::nullopt);

RecurrenceEstimate recurrence_volume(const FlowModel& model, const RecurrenceSpec& spec, std::size_t samples,
                                     std::uint64_t seed, unsigned threads = 0);

// Volume of the surrogate S_{T, K eps}, which contains the eps-neighbourhood
// of S_{T,eps} for K >= 2 + c e^{lambda T}.
RecurrenceEstimate extended_volume(const FlowModel& model, const RecurrenceSpec& spec, std::size_t samples,
                                   std::uint64_t seed, unsigned threads = 0);

enum class TimeLaw { Power, Exponential };

struct ScalingRow {
    double eps, T, volume;
};

struct ScalingFit {
    double a_eps = 0;   // exponent of eps
    double b_T = 0;     // exponent of T (power) or rate (exponential)
    double log_c = 0;
    double residual = 0; // largest absolute residual in log volume
};

// Least squares for log v = log C + a log eps + b X_T with X_T = log T or T.
ScalingFit scaling_fit(const std::vector<ScalingRow>& rows, TimeLaw mode);

// Bound of the form eps^a T^b (power) or eps^a e^{b T} (exponential).
struct BoundLaw {
    double eps_exponent = 1;
    double t_exponent = 1;
    TimeLaw mode = TimeLaw::Power;

    double operator()(double eps, double T) const;
    std::string describe() const;
};

struct BoundReport {
    bool pass = true;
    double constant = 0;     // C calibrated at the anchor
    double worst_ratio = 0;  // max ci_low / (C law slack)
    std::size_t worst_index = 0;
    std::vector<std::size_t> violations;
};

// PASS when ci_low <= C law(eps, T) slack on every row, C = volume / law at the anchor.
BoundReport bound_check(const std::vector<RecurrenceEstimate>& estimates, const BoundLaw& law, std::size_t anchor,
                        double slack = 1.5);

// Index of the cell with the smallest law value among cells with positive volume
// (0 when every volume vanishes).
std::size_t min_law_anchor(const std::vector<RecurrenceEstimate>& estimates, const BoundLaw& law);

// CSV with columns model,T,eps,K,samples,seed,volume,ci_low,ci_high,failed_samples
void write_recurrence_csv(std::ostream& out, const std::string& model, const std::vector<RecurrenceEstimate>& rows);
// Reads the same schema back. Hit counts are not stored and come back as 0.
std::vector<RecurrenceEstimate> read_recurrence_csv(std::istream& in);

} // namespace weyllab
