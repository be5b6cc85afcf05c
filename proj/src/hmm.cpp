#include "opacity/hmm.hpp"

#include "opacity/rng.hpp"

#include <cmath>
#include <limits>

namespace opacity {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

ObservationModel::ObservationModel(std::vector<std::string> symbols, Mat emission)
    : symbols_(std::move(symbols)), emission_(std::move(emission)) {
    if (static_cast<Index>(symbols_.size()) != emission_.cols())
        throw ModelError("observation symbol list does not match emission columns");
    if (emission_.cols() == 0) throw ModelError("observation model needs at least one symbol");
    for (std::size_t a = 0; a < symbols_.size(); ++a)
        for (std::size_t b = a + 1; b < symbols_.size(); ++b)
            if (symbols_[a] == symbols_[b]) throw ModelError("duplicate observation symbol '" + symbols_[a] + "'");
    for (Index i = 0; i < emission_.rows(); ++i) {
        const auto row = emission_.row(i);
        if (!row.allFinite() || row.minCoeff() < 0.0)
            throw ModelError("emission row " + std::to_string(i) + " has a negative or non-finite entry");
        if (std::abs(row.sum() - 1.0) > 1e-12)
            throw ModelError("emission row " + std::to_string(i) + " does not sum to 1");
    }
}

Vec ObservationModel::likelihood(Index symbol) const {
    if (symbol < 0 || symbol >= num_symbols())
        throw std::out_of_range("observation index " + std::to_string(symbol) + " out of range");
    return emission_.col(symbol);
}

Index ObservationModel::symbol_index(const std::string& symbol) const {
    for (std::size_t k = 0; k < symbols_.size(); ++k)
        if (symbols_[k] == symbol) return static_cast<Index>(k);
    throw std::out_of_range("unknown observation symbol '" + symbol + "'");
}

void check_sequence(const ObservationModel& obs, const ObsSeq& y) {
    if (y.empty()) throw std::invalid_argument("observation sequence must hold at least o_0");
    for (Index o : y)
        if (o < 0 || o >= obs.num_symbols())
            throw std::out_of_range("observation index " + std::to_string(o) + " out of range");
}

double ForwardTable::alpha(int t, Index j) const {
    if (!std::isfinite(cum_log_[t])) return 0.0;
    return normalized_(t, j) * std::exp(cum_log_[t]);
}

Vec ForwardTable::alpha_grad(int t, Index j) const {
    const Index d = log_prob_grad_.size();
    if (!has_gradient()) throw std::logic_error("forward table was built without gradients");
    if (!std::isfinite(cum_log_[t])) return Vec::Zero(d);
    const Vec g = normalized_grad_[static_cast<std::size_t>(t)].row(j).transpose() +
                  normalized_(t, j) * cum_log_grad_.row(t).transpose();
    return std::exp(cum_log_[t]) * g;
}

double ForwardTable::seq_prob() const {
    return evidence_ ? std::exp(log_prob_) : 0.0;
}

Vec ForwardTable::seq_prob_grad() const {
    return seq_prob() * log_prob_grad_;
}

ForwardTable forward_messages(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                              const ObsSeq& y, bool with_gradient) {
    check_sequence(obs, y);
    const Index n = chain.num_states();
    const Index k = chain.num_actions();
    const Index d = chain.param_dim();
    if (obs.num_states() != n || mu0.size() != n)
        throw std::invalid_argument("forward_messages: model dimensions disagree");
    const int horizon = static_cast<int>(y.size()) - 1;
    const auto steps = static_cast<Index>(y.size());

    ForwardTable table;
    table.normalized_ = Mat::Zero(steps, n);
    table.log_scale_ = Vec::Constant(steps, kNegInf);
    table.log_scale_grad_ = Mat::Zero(steps, d);
    if (with_gradient) table.normalized_grad_.assign(static_cast<std::size_t>(steps), Mat::Zero(n, d));

    const Mat kernel_t = chain.kernel().transpose();
    Vec x = mu0.cwiseProduct(obs.likelihood(y[0]));
    Mat gx = Mat::Zero(n, with_gradient ? d : 0);
    for (int t = 0; t <= horizon; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        if (t > 0) {
            const Vec b = obs.likelihood(y[ts]);
            const Vec prev = table.normalized_.row(t - 1).transpose();
            x = b.cwiseProduct(kernel_t * prev);
            if (with_gradient) {
                gx = kernel_t * table.normalized_grad_[ts - 1];
                for (Index i = 0; i < n; ++i) gx.middleCols(i * k, k) += prev[i] * chain.row_grad(i);
                gx = b.asDiagonal() * gx;
            }
        }
        const double s = x.sum();
        if (!(s > 0.0)) {
            table.evidence_ = false;
            break;
        }
        table.normalized_.row(t) = (x / s).transpose();
        table.log_scale_[t] = std::log(s);
        if (with_gradient && t > 0) {
            const Eigen::RowVectorXd gs = gx.colwise().sum();
            table.log_scale_grad_.row(t) = gs / s;
            table.normalized_grad_[ts] = (gx - table.normalized_.row(t).transpose() * gs) / s;
        }
    }

    table.cum_log_ = Vec(steps);
    table.cum_log_grad_ = Mat::Zero(steps, d);
    double running = 0.0;
    Eigen::RowVectorXd running_grad = Eigen::RowVectorXd::Zero(d);
    for (Index t = 0; t < steps; ++t) {
        running += table.log_scale_[t];
        running_grad += table.log_scale_grad_.row(t);
        table.cum_log_[t] = running;
        table.cum_log_grad_.row(t) = running_grad;
    }
    table.log_prob_ = table.evidence_ ? running : kNegInf;
    table.log_prob_grad_ = table.evidence_ ? Vec(running_grad.transpose()) : Vec::Zero(d);
    return table;
}

double BackwardTable::beta(int t, Index i) const {
    if (!std::isfinite(cum_log_[t])) return 0.0;
    return normalized_(t, i) * std::exp(cum_log_[t]);
}

Vec BackwardTable::beta_grad(int t, Index i) const {
    if (!std::isfinite(cum_log_[t])) return Vec::Zero(cum_log_grad_.cols());
    const Vec g = normalized_grad_[static_cast<std::size_t>(t)].row(i).transpose() +
                  normalized_(t, i) * cum_log_grad_.row(t).transpose();
    return std::exp(cum_log_[t]) * g;
}

BackwardTable backward_messages(const InducedChain& chain, const ObservationModel& obs, const ObsSeq& y) {
    check_sequence(obs, y);
    const Index n = chain.num_states();
    const Index k = chain.num_actions();
    const Index d = chain.param_dim();
    if (obs.num_states() != n) throw std::invalid_argument("backward_messages: model dimensions disagree");
    const int horizon = static_cast<int>(y.size()) - 1;
    const auto steps = static_cast<Index>(y.size());

    BackwardTable table;
    table.normalized_ = Mat::Zero(steps, n);
    table.normalized_grad_.assign(static_cast<std::size_t>(steps), Mat::Zero(n, d));
    table.cum_log_ = Vec::Constant(steps, kNegInf);
    table.cum_log_grad_ = Mat::Zero(steps, d);

    table.normalized_.row(horizon).setOnes();
    table.cum_log_[horizon] = 0.0;
    for (int t = horizon - 1; t >= 0; --t) {
        const auto ts = static_cast<std::size_t>(t);
        const Vec b = obs.likelihood(y[ts + 1]);
        const Vec w = b.cwiseProduct(table.normalized_.row(t + 1).transpose());
        const Vec x = chain.kernel() * w;
        Mat gx = chain.kernel() * (b.asDiagonal() * table.normalized_grad_[ts + 1]);
        for (Index i = 0; i < n; ++i) gx.block(i, i * k, 1, k) += w.transpose() * chain.row_grad(i);

        const double r = x.sum();
        if (!(r > 0.0)) {
            table.evidence_ = false;
            break;
        }
        const Eigen::RowVectorXd gr = gx.colwise().sum();
        table.normalized_.row(t) = (x / r).transpose();
        table.normalized_grad_[ts] = (gx - (x / r) * gr) / r;
        table.cum_log_[t] = table.cum_log_[t + 1] + std::log(r);
        table.cum_log_grad_.row(t) = table.cum_log_grad_.row(t + 1) + gr / r;
    }
    return table;
}

Likelihood likelihood_given_start(const BackwardTable& table, const ObservationModel& obs, const ObsSeq& y,
                                  Index i) {
    check_sequence(obs, y);
    if (i < 0 || i >= table.num_states()) throw std::out_of_range("start state out of range");
    const double b0 = obs.emission(i, y[0]);
    return {b0 * table.beta(0, i), b0 * table.beta_grad(0, i)};
}

Run sample_run(const Mdp& mdp, const ObservationModel& obs, const PolicyParams& theta, int horizon, Rng& rng) {
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    const Mat pi = policy_table(theta);
    Run run;
    const auto steps = static_cast<std::size_t>(horizon) + 1;
    run.states.reserve(steps);
    run.actions.reserve(steps);
    run.observations.reserve(steps);
    Index s = rng.categorical(mdp.initial());
    for (std::size_t t = 0; t < steps; ++t) {
        run.states.push_back(s);
        run.observations.push_back(rng.categorical(obs.emission().row(s).transpose()));
        const Index a = rng.categorical(pi.row(s).transpose());
        run.actions.push_back(a);
        if (t + 1 < steps) s = rng.categorical(mdp.transition(a).row(s).transpose());
    }
    return run;
}

ObsSeq sample_observations(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0, int horizon,
                           Rng& rng) {
    if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
    ObsSeq y;
    y.reserve(static_cast<std::size_t>(horizon) + 1);
    Index s = rng.categorical(mu0);
    for (int t = 0; t <= horizon; ++t) {
        y.push_back(rng.categorical(obs.emission().row(s).transpose()));
        if (t < horizon) s = rng.categorical(chain.kernel().row(s).transpose());
    }
    return y;
}

Vec path_functional_gradient(const InducedChain& chain, const ObservationModel& obs, const Vec& mu0,
                             const ObsSeq& y, const Vec& start_weight, const Vec& end_weight) {
    check_sequence(obs, y);
    const Index n = chain.num_states();
    const int horizon = static_cast<int>(y.size()) - 1;
    const auto steps = static_cast<std::size_t>(horizon) + 1;
    const Mat kernel_t = chain.kernel().transpose();

    // Forward: plain normalizers s_t, and the u-weighted messages scaled by the same s_t.
    std::vector<Vec> weighted(steps);
    std::vector<double> scale(steps);
    Vec plain = mu0.cwiseProduct(obs.likelihood(y[0]));
    Vec with_u = plain.cwiseProduct(start_weight);
    for (std::size_t t = 0; t < steps; ++t) {
        if (t > 0) {
            const Vec b = obs.likelihood(y[t]);
            plain = b.cwiseProduct(kernel_t * plain);
            with_u = b.cwiseProduct(kernel_t * weighted[t - 1]);
        }
        const double s = plain.sum();
        if (!(s > 0.0)) throw DegenerateEvidence("observation sequence has zero probability");
        scale[t] = s;
        plain /= s;
        weighted[t] = with_u / s;
    }

    // Backward adjoint xi_t = beta^v_t / prod_{u>t} s_u, accumulated into dF/dP / P(y).
    Mat sensitivity = Mat::Zero(n, n);
    Vec xi = end_weight;
    for (std::size_t t = steps - 1; t >= 1; --t) {
        const Vec bxi = obs.likelihood(y[t]).cwiseProduct(xi) / scale[t];
        sensitivity.noalias() += weighted[t - 1] * bxi.transpose();
        xi = chain.kernel() * bxi;
    }
    return chain.chain_rule(sensitivity);
}

}  // namespace opacity
