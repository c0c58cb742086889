#include "stochint/integrate.hpp"
#include "stochint/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochint {

PathValues::PathValues(std::size_t dim, std::vector<double> flat)
    : dim_(dim), points_(dim ? flat.size() / dim : 0), data_(std::move(flat)) {
    if (dim_ == 0 || data_.size() % dim_ != 0) throw std::invalid_argument("PathValues: bad shape");
}

// ---------------------------------------------------------------------------
// PathView
// ---------------------------------------------------------------------------

double PathView::value(std::size_t component, std::size_t index) const {
    if (index > now_) {
        throw std::logic_error("non-adapted read: W at index " + std::to_string(index) +
                               " requested at time index " + std::to_string(now_));
    }
    if (component >= noise_->k()) throw std::out_of_range("PathView: component out of range");
    return noise_->value(component, index);
}

double PathView::increment(std::size_t component, std::size_t index) const {
    if (index >= now_) {
        throw std::logic_error("non-adapted read: increment " + std::to_string(index) +
                               " requested at time index " + std::to_string(now_));
    }
    if (component >= noise_->k()) throw std::out_of_range("PathView: component out of range");
    return noise_->increment(component, index);
}

std::span<const double> PathView::state(std::size_t index) const {
    if (!states_) throw std::logic_error("PathView: no solution states attached");
    if (index > now_) {
        throw std::logic_error("non-adapted read: state " + std::to_string(index) +
                               " requested at time index " + std::to_string(now_));
    }
    return states_->at(index);
}

// ---------------------------------------------------------------------------
// ProcessSampler
// ---------------------------------------------------------------------------

ProcessSampler::ProcessSampler(std::size_t dim, std::size_t columns, Rule rule,
                               Integrability integrability, Adaptedness adaptedness)
    : dim_(dim), columns_(columns), rule_(std::move(rule)), integrability_(integrability),
      adaptedness_(adaptedness) {
    if (dim_ == 0 || columns_ == 0) throw std::invalid_argument("ProcessSampler: empty shape");
    if (!rule_) throw std::invalid_argument("ProcessSampler: null rule");
}

ProcessSampler ProcessSampler::constant(Vec a) {
    const std::size_t d = a.size();
    return ProcessSampler(d, 1, [a = std::move(a)](const PathView&, std::span<double> out) {
        std::copy(a.begin(), a.end(), out.begin());
    });
}

ProcessSampler ProcessSampler::constant_columns(std::size_t dim, std::vector<Vec> columns) {
    const std::size_t k = columns.size();
    std::vector<double> flat;
    flat.reserve(dim * k);
    for (const auto& c : columns) {
        if (c.size() != dim) throw std::invalid_argument("constant_columns: column length differs from dim");
        flat.insert(flat.end(), c.begin(), c.end());
    }
    return ProcessSampler(dim, k, [flat = std::move(flat)](const PathView&, std::span<double> out) {
        std::copy(flat.begin(), flat.end(), out.begin());
    });
}

ProcessSampler ProcessSampler::with_rule(std::size_t dim, std::size_t columns, Rule rule) const {
    ProcessSampler out(dim, columns, std::move(rule), integrability_, adaptedness_);
    out.stops_ = stops_;
    if (!out.stops_.empty()) {
        auto self = std::make_shared<const ProcessSampler>(*this);
        for (auto& s : out.stops_)
            if (!s.monitor) s.monitor = self;
    }
    return out;
}

ProcessSampler ProcessSampler::scaled(double alpha) const {
    return with_rule(dim_, columns_, [rule = rule_, alpha](const PathView& v, std::span<double> out) {
        rule(v, out);
        for (double& x : out) x *= alpha;
    });
}

ProcessSampler ProcessSampler::plus(const ProcessSampler& other) const {
    if (other.dim_ != dim_ || other.columns_ != columns_) {
        throw std::invalid_argument("ProcessSampler::plus: shape mismatch");
    }
    if (localized() || other.localized()) {
        throw std::invalid_argument("ProcessSampler::plus: localize after combining");
    }
    const auto integrability = (integrability_ == Integrability::square_integrable &&
                                other.integrability_ == Integrability::square_integrable)
                                   ? Integrability::square_integrable
                                   : Integrability::locally_square_integrable;
    const auto adaptedness = (adaptedness_ == Adaptedness::left_point &&
                              other.adaptedness_ == Adaptedness::left_point)
                                 ? Adaptedness::left_point
                                 : Adaptedness::anticipating;
    const std::size_t width = dim_ * columns_;
    return ProcessSampler(
        dim_, columns_,
        [a = rule_, b = other.rule_, width](const PathView& v, std::span<double> out) {
            std::vector<double> tmp;
            a(v, out);
            tmp.resize(width);
            b(v, tmp);
            for (std::size_t i = 0; i < width; ++i) out[i] += tmp[i];
        },
        integrability, adaptedness);
}

ProcessSampler ProcessSampler::mapped(const LinearOp& op) const {
    if (op.dim() != dim_) throw std::invalid_argument("ProcessSampler::mapped: dimension mismatch");
    const std::size_t d = dim_, cols = columns_;
    return with_rule(d, cols, [rule = rule_, op, d, cols](const PathView& v, std::span<double> out) {
        std::vector<double> tmp;
        tmp.resize(d * cols);
        rule(v, tmp);
        for (std::size_t c = 0; c < cols; ++c) {
            op.apply(std::span<const double>(tmp).subspan(c * d, d), out.subspan(c * d, d));
        }
    });
}

ProcessSampler ProcessSampler::paired(const SpaceScale& scale, std::span<const double> phi) const {
    if (phi.size() != dim_ || scale.dim() != dim_) {
        throw std::invalid_argument("ProcessSampler::paired: dimension mismatch");
    }
    const std::size_t d = dim_, cols = columns_;
    return with_rule(1, cols,
                     [rule = rule_, scale, phi = Vec(phi.begin(), phi.end()), d, cols](
                         const PathView& v, std::span<double> out) {
                         std::vector<double> tmp;
                         tmp.resize(d * cols);
                         rule(v, tmp);
                         for (std::size_t c = 0; c < cols; ++c) {
                             out[c] = inner(scale, Space::H,
                                            std::span<const double>(tmp).subspan(c * d, d), phi);
                         }
                     });
}

ProcessSampler localize(const ProcessSampler& sampler, const StoppingRule& rule) {
    if (rule.unbounded()) return sampler;
    if (!(rule.level > 0.0)) throw std::invalid_argument("localize: level must be positive");
    if (!rule.scale || rule.scale->dim() != sampler.dim()) {
        throw std::invalid_argument("localize: stopping rule needs a scale conforming to the sampler");
    }
    ProcessSampler out = sampler;
    out.stops_.push_back({rule, nullptr});
    out.integrability_ = Integrability::square_integrable;
    return out;
}

// ---------------------------------------------------------------------------
// SamplerCursor
// ---------------------------------------------------------------------------

SamplerCursor::SamplerCursor(const ProcessSampler& sampler, const CylindricalNoise& noise,
                             const PathValues* states)
    : sampler_(&sampler), noise_(&noise), states_(states), raw_(sampler.width()),
      value_(sampler.width()), running_(sampler.stops_.size(), 0.0) {}

void SamplerCursor::reset() {
    next_ = 0;
    std::fill(running_.begin(), running_.end(), 0.0);
    stopped_ = false;
    stopped_at_.reset();
}

namespace {

double squared_hs(const SpaceScale& scale, Space space, std::span<const double> cols, std::size_t dim) {
    double s = 0.0;
    for (std::size_t c = 0; c * dim < cols.size(); ++c) {
        const auto col = cols.subspan(c * dim, dim);
        s += inner(scale, space, col, col);
    }
    return s;
}

// First passage is declared within a relative 1e-12 of the level so that a
// running sum landing on the level up to rounding counts as reaching it.
constexpr double kPassageSlack = 1e-12;

}  // namespace

void SamplerCursor::advance() {
    const std::size_t j = next_;
    const PathView view(*noise_, j, states_);
    sampler_->rule_(view, raw_);
    const double dt = noise_->grid().dt;
    const double tj = noise_->grid().time(j);

    if (!stopped_) {
        for (std::size_t s = 0; s < running_.size(); ++s) {
            const double level = sampler_->stops_[s].rule.level;
            const double reach = level * (1.0 - kPassageSlack);
            if (running_[s] >= reach || tj >= reach) {
                stopped_ = true;
                stopped_at_ = tj;
                break;
            }
        }
    }
    if (stopped_) {
        std::fill(value_.begin(), value_.end(), 0.0);
    } else {
        std::copy(raw_.begin(), raw_.end(), value_.begin());
        for (std::size_t s = 0; s < running_.size(); ++s) {
            const auto& stop = sampler_->stops_[s];
            std::span<const double> monitored = raw_;
            std::size_t mdim = sampler_->dim();
            if (stop.monitor) {
                monitor_raw_.resize(stop.monitor->width());
                stop.monitor->rule_(view, monitor_raw_);
                monitored = monitor_raw_;
                mdim = stop.monitor->dim();
            }
            running_[s] += squared_hs(*stop.rule.scale, stop.rule.space, monitored, mdim) * dt;
        }
    }
    ++next_;
}

std::span<const double> SamplerCursor::at(std::size_t k) {
    if (k > noise_->steps()) throw std::out_of_range("SamplerCursor: index past the grid");
    if (next_ > 0 && k + 1 < next_) reset();
    while (next_ <= k) advance();
    return value_;
}

// ---------------------------------------------------------------------------
// Simple processes
// ---------------------------------------------------------------------------

SimpleProcess::SimpleProcess(std::vector<double> breakpoints, std::size_t dim, ValueRule values)
    : breakpoints_(std::move(breakpoints)), dim_(dim), values_(std::move(values)) {
    if (breakpoints_.empty() || breakpoints_.front() != 0.0) {
        throw std::invalid_argument("SimpleProcess: breakpoints must start at 0");
    }
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > breakpoints_[i - 1])) {
            throw std::invalid_argument("SimpleProcess: breakpoints must be strictly increasing");
        }
    }
    if (dim_ == 0 || !values_) throw std::invalid_argument("SimpleProcess: empty values");
}

SimpleProcess::SimpleProcess(std::vector<double> breakpoints, std::vector<Vec> values)
    : SimpleProcess(std::move(breakpoints), values.empty() ? 0 : values.front().size(),
                    [values](const PathView&, std::size_t block, std::span<double> out) {
                        std::copy(values[block].begin(), values[block].end(), out.begin());
                    }) {
    if (values.size() != breakpoints_.size()) {
        throw std::invalid_argument("SimpleProcess: need one value per breakpoint");
    }
    for (const auto& v : values)
        if (v.size() != dim_) throw std::invalid_argument("SimpleProcess: value length differs");
}

Vec integrate_simple(const SimpleProcess& proc, const CylindricalNoise& noise, double t,
                     std::size_t component) {
    const auto& grid = noise.grid();
    const std::size_t n = grid.index_of(t);
    std::vector<std::size_t> idx;
    idx.reserve(proc.breakpoints().size());
    for (double b : proc.breakpoints()) {
        try {
            idx.push_back(grid.index_of(b));
        } catch (const std::out_of_range&) {
            throw std::invalid_argument("integrate_simple: breakpoint " + std::to_string(b) +
                                        " is off the grid");
        }
    }
    Vec out(proc.dim(), 0.0);
    Vec a(proc.dim());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t lo = std::min(idx[i], n);
        const std::size_t hi = (i + 1 < idx.size()) ? std::min(idx[i + 1], n) : n;
        if (hi <= lo) continue;
        proc.value(PathView(noise, idx[i]), i, a);
        const double dw = noise.value(component, hi) - noise.value(component, lo);
        for (std::size_t d = 0; d < a.size(); ++d) out[d] += a[d] * dw;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid integrals
// ---------------------------------------------------------------------------

namespace {

void require_adapted(const ProcessSampler& s, const char* what) {
    if (s.adaptedness() != Adaptedness::left_point) {
        throw std::invalid_argument(std::string(what) + ": sampler is not adapted");
    }
}

// Accumulates Σ_k Σ_c Ψ_c(t_k) ΔW^{c}_k into out (length dim); `components`
// is the driver component per column.
void accumulate_step(std::span<const double> value, std::size_t dim, const CylindricalNoise& noise,
                     std::size_t k, std::size_t first_component, std::span<double> out) {
    const std::size_t cols = value.size() / dim;
    for (std::size_t c = 0; c < cols; ++c) {
        const double dw = noise.increment(first_component + c, k);
        const double* col = value.data() + c * dim;
        for (std::size_t d = 0; d < dim; ++d) out[d] += col[d] * dw;
    }
}

}  // namespace

Vec integrate_ito(const ProcessSampler& sampler, const CylindricalNoise& noise, double t,
                  std::size_t component) {
    require_adapted(sampler, "integrate_ito");
    if (sampler.columns() != 1) throw std::invalid_argument("integrate_ito: expected an H-valued sampler");
    if (component >= noise.k()) throw std::out_of_range("integrate_ito: component out of range");
    const std::size_t n = noise.grid().index_of(t);
    Vec out(sampler.dim(), 0.0);
    SamplerCursor cursor(sampler, noise);
    for (std::size_t k = 0; k < n; ++k) accumulate_step(cursor.at(k), sampler.dim(), noise, k, component, out);
    return out;
}

Vec integrate_cylindrical(const ProcessSampler& sampler, const CylindricalNoise& noise, double t) {
    require_adapted(sampler, "integrate_cylindrical");
    if (sampler.columns() != noise.k()) {
        throw std::invalid_argument("integrate_cylindrical: sampler has " + std::to_string(sampler.columns()) +
                                    " columns but noise has K=" + std::to_string(noise.k()));
    }
    const std::size_t n = noise.grid().index_of(t);
    Vec out(sampler.dim(), 0.0);
    SamplerCursor cursor(sampler, noise);
    for (std::size_t k = 0; k < n; ++k) accumulate_step(cursor.at(k), sampler.dim(), noise, k, 0, out);
    return out;
}

PathValues ito_path(const ProcessSampler& sampler, const CylindricalNoise& noise, double t,
                    const PathValues* states) {
    require_adapted(sampler, "ito_path");
    if (sampler.columns() != 1 && sampler.columns() != noise.k()) {
        throw std::invalid_argument("ito_path: column count must be 1 or K");
    }
    const std::size_t n = noise.grid().index_of(t);
    const std::size_t d = sampler.dim();
    PathValues path(d, n + 1);
    Vec acc(d, 0.0);
    SamplerCursor cursor(sampler, noise, states);
    for (std::size_t k = 0; k < n; ++k) {
        accumulate_step(cursor.at(k), d, noise, k, 0, acc);
        std::copy(acc.begin(), acc.end(), path.at(k + 1).begin());
    }
    return path;
}

double running_square_integral(const ProcessSampler& sampler, const CylindricalNoise& noise,
                               double t, const SpaceScale& scale, Space space) {
    const std::size_t n = noise.grid().index_of(t);
    SamplerCursor cursor(sampler, noise);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += squared_hs(scale, space, cursor.at(k), sampler.dim());
    return acc * noise.grid().dt;
}

// ---------------------------------------------------------------------------
// Identity checks
// ---------------------------------------------------------------------------

namespace {

std::size_t driver_modes(const ProcessSampler& s) { return s.columns(); }

TimeGrid grid_through(const TimeGrid& grid, double t) {
    return TimeGrid(grid.dt, std::max<std::size_t>(grid.index_of(t), 1));
}

Vec integrate_any(const ProcessSampler& s, const CylindricalNoise& noise, double t) {
    return s.columns() == 1 ? integrate_ito(s, noise, t) : integrate_cylindrical(s, noise, t);
}

}  // namespace

IsometryRecord isometry_check(const ProcessSampler& sampler, const SpaceScale& scale, Space space,
                              const TimeGrid& grid, double t, const MonteCarlo& mc) {
    if (mc.n_paths < 100) throw std::invalid_argument("isometry_check: need at least 100 paths for a CI");
    if (sampler.integrability() != Integrability::square_integrable) {
        throw std::invalid_argument("isometry_check: locally square-integrable sampler must be localized first");
    }
    require_adapted(sampler, "isometry_check");
    const TimeGrid g = grid_through(grid, t);
    const std::size_t modes = driver_modes(sampler);

    auto table = run_paths(mc.n_paths, 3, mc.workers, [&](std::size_t p, std::span<double> out) {
        const auto noise = sample_cylindrical(g, modes, mc.seed, p);
        const Vec x = integrate_any(sampler, noise, t);
        out[0] = inner(scale, space, x, x);
        out[1] = running_square_integral(sampler, noise, t, scale, space);
        out[2] = out[0] - out[1];
    });
    IsometryRecord r{};
    r.lhs = sample_mean(table.column(0));
    r.rhs = sample_mean(table.column(1));
    const double n = static_cast<double>(mc.n_paths);
    r.lhs_std_err = std::sqrt(sample_variance(table.column(0)) / n);
    r.rhs_std_err = std::sqrt(sample_variance(table.column(1)) / n);
    r.ci = 1.96 * std::sqrt(sample_variance(table.column(2)) / n);
    r.rel_err = r.rhs != 0.0 ? std::abs(r.lhs - r.rhs) / std::abs(r.rhs) : std::abs(r.lhs);
    r.lhs_summary = summarize(table.column(0), mc.seed ^ 0x15A1ull);
    r.rhs_summary = summarize(table.column(1), mc.seed ^ 0x15A2ull);
    return r;
}

DualityRecord duality_check(const ProcessSampler& sampler, const SpaceScale& scale,
                            std::span<const double> phi, const TimeGrid& grid, double t,
                            const MonteCarlo& mc) {
    require_adapted(sampler, "duality_check");
    const TimeGrid g = grid_through(grid, t);
    const std::size_t n = g.index_of(t);
    const std::size_t modes = driver_modes(sampler);
    const ProcessSampler pairing = sampler.paired(scale, phi);
    const auto w = scale.weights(Space::H);

    auto table = run_paths(mc.n_paths, 4, mc.workers, [&](std::size_t p, std::span<double> out) {
        const auto noise = sample_cylindrical(g, modes, mc.seed, p);
        const Vec x = integrate_any(sampler, noise, t);
        out[0] = inner(scale, Space::H, x, phi);
        out[1] = integrate_any(pairing, noise, t)[0];
        // Term scale: Σ_k Σ_c Σ_i |w_i Ψ_{k,c,i} φ_i ΔW^c_k|.
        SamplerCursor cursor(sampler, noise);
        double terms = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto v = cursor.at(k);
            for (std::size_t c = 0; c < sampler.columns(); ++c) {
                const double dw = std::abs(noise.increment(c, k));
                for (std::size_t i = 0; i < sampler.dim(); ++i)
                    terms += std::abs(w[i] * v[c * sampler.dim() + i] * phi[i]) * dw;
            }
        }
        out[2] = std::abs(out[0] - out[1]);
        out[3] = out[2] / std::max(terms, std::numeric_limits<double>::min());
    });
    DualityRecord r{};
    r.lhs = table.column(0).back();
    r.rhs = table.column(1).back();
    const auto d = table.column(2);
    const auto rel = table.column(3);
    r.max_abs_diff = *std::max_element(d.begin(), d.end());
    r.max_rel_diff = *std::max_element(rel.begin(), rel.end());
    return r;
}

PushthroughRecord operator_pushthrough_check(const LinearOp& op, const ProcessSampler& sampler,
                                             const TimeGrid& grid, double t, const MonteCarlo& mc) {
    require_adapted(sampler, "operator_pushthrough_check");
    if (op.dim() != sampler.dim()) throw std::invalid_argument("operator_pushthrough_check: dimension mismatch");
    const TimeGrid g = grid_through(grid, t);
    const std::size_t n = g.index_of(t);
    const std::size_t modes = driver_modes(sampler);
    const ProcessSampler pushed = sampler.mapped(op);
    const std::size_t d = sampler.dim();

    auto table = run_paths(mc.n_paths, 2, mc.workers, [&](std::size_t p, std::span<double> out) {
        const auto noise = sample_cylindrical(g, modes, mc.seed, p);
        const Vec lhs = op.apply(integrate_any(sampler, noise, t));
        const Vec rhs = integrate_any(pushed, noise, t);
        // Row scale: Σ_k Σ_c Σ_j |T_rj Ψ_{k,c,j} ΔW^c_k|, maximised over rows.
        SamplerCursor cursor(sampler, noise);
        Vec row_terms(d, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto v = cursor.at(k);
            for (std::size_t c = 0; c < sampler.columns(); ++c) {
                const double dw = std::abs(noise.increment(c, k));
                for (std::size_t r = 0; r < d; ++r)
                    for (std::size_t j = 0; j < d; ++j) row_terms[r] += std::abs(op(r, j) * v[c * d + j]) * dw;
            }
        }
        double diff = 0.0, rel = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
            const double e = std::abs(lhs[r] - rhs[r]);
            diff = std::max(diff, e);
            rel = std::max(rel, e / std::max(row_terms[r], std::numeric_limits<double>::min()));
        }
        out[0] = diff;
        out[1] = rel;
    });
    const auto a = table.column(0);
    const auto b = table.column(1);
    return {*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end())};
}

}  // namespace stochint
