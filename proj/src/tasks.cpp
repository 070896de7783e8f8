#include "fedma/tasks.hpp"

#include <algorithm>
#include <cmath>

namespace fedma {

Vector local_update(const Task& task, Eigen::Index client, const Vector& theta_received,
                    double eta_local, Eigen::Index local_steps) {
    Vector theta = theta_received;
    for (Eigen::Index q = 0; q < local_steps; ++q) {
        const Vector g = task.client_gradient(client, theta);
        if (!all_finite(g)) throw numerical_error("local_update: client objective diverged");
        theta -= eta_local * g;
    }
    return theta_received - theta;
}

QuadraticTask::QuadraticTask(Eigen::Index dim, Eigen::Index num_clients, double heterogeneity,
                             std::uint64_t seed)
    : dim_(dim) {
    require(dim >= 1 && num_clients >= 1, "QuadraticTask: bad dimensions");
    RngStream rng = substream(seed, "task.quadratic");
    Vector c_star(dim);
    for (Eigen::Index i = 0; i < dim; ++i) c_star(i) = rng.next_normal();

    centers_.reserve(static_cast<size_t>(num_clients));
    mean_center_ = Vector::Zero(dim);
    for (Eigen::Index k = 0; k < num_clients; ++k) {
        Vector c = c_star;
        for (Eigen::Index i = 0; i < dim; ++i) c(i) += heterogeneity * rng.next_normal();
        mean_center_ += c;
        centers_.push_back(std::move(c));
    }
    mean_center_ /= static_cast<double>(num_clients);
}

Vector QuadraticTask::client_gradient(Eigen::Index client, const Vector& theta) const {
    require(client >= 0 && client < num_clients(), "QuadraticTask: client id out of range");
    return theta - centers_[static_cast<size_t>(client)];
}

double QuadraticTask::global_loss(const Vector& theta) const {
    double loss = 0.0;
    for (const auto& c : centers_) loss += 0.5 * (theta - c).squaredNorm();
    return loss / static_cast<double>(centers_.size());
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

LogisticTask::LogisticTask(Eigen::Index dim, Eigen::Index num_clients,
                           Eigen::Index samples_per_client, double heterogeneity,
                           double label_noise, std::uint64_t seed, double l2_reg)
    : dim_(dim), num_clients_(num_clients), l2_reg_(l2_reg) {
    require(dim >= 1 && num_clients >= 1 && samples_per_client >= 1, "LogisticTask: bad dimensions");
    RngStream rng = substream(seed, "task.logistic");

    Vector w_star(dim);
    for (Eigen::Index i = 0; i < dim; ++i) w_star(i) = rng.next_normal();
    w_star.normalize();
    w_star *= 2.0;

    features_.reserve(static_cast<size_t>(num_clients));
    labels_.reserve(static_cast<size_t>(num_clients));
    for (Eigen::Index k = 0; k < num_clients; ++k) {
        // per-client feature shift realizes heterogeneity
        Vector shift(dim);
        for (Eigen::Index i = 0; i < dim; ++i) shift(i) = heterogeneity * rng.next_normal();
        Matrix x(samples_per_client, dim);
        Vector y(samples_per_client);
        for (Eigen::Index n = 0; n < samples_per_client; ++n) {
            for (Eigen::Index i = 0; i < dim; ++i) x(n, i) = rng.next_normal() + shift(i);
            const double p = sigmoid(x.row(n).dot(w_star));
            double label = rng.next_double() < p ? 1.0 : -1.0;
            if (rng.next_double() < label_noise) label = -label;
            y(n) = label;
        }
        features_.push_back(std::move(x));
        labels_.push_back(std::move(y));
    }

    // Newton iterations on the global objective; it is l2_reg-strongly
    // convex so a handful of steps reach machine precision.
    Vector w = Vector::Zero(dim);
    for (int it = 0; it < 50; ++it) {
        Vector grad = Vector::Zero(dim);
        Matrix hess = Matrix::Zero(dim, dim);
        double total = 0.0;
        for (Eigen::Index k = 0; k < num_clients; ++k) {
            const Matrix& x = features_[static_cast<size_t>(k)];
            const Vector& y = labels_[static_cast<size_t>(k)];
            for (Eigen::Index n = 0; n < x.rows(); ++n) {
                const double z = y(n) * x.row(n).dot(w);
                const double s = sigmoid(-z);
                grad -= (s * y(n)) * x.row(n).transpose();
                hess += (s * (1.0 - s)) * (x.row(n).transpose() * x.row(n));
            }
            total += static_cast<double>(x.rows());
        }
        grad = grad / total + l2_reg_ * w;
        hess = hess / total + l2_reg_ * Matrix::Identity(dim, dim);
        const Vector step = hess.ldlt().solve(grad);
        w -= step;
        if (step.norm() < 1e-13) break;
    }
    optimum_ = w;
}

Vector LogisticTask::client_gradient(Eigen::Index client, const Vector& theta) const {
    require(client >= 0 && client < num_clients_, "LogisticTask: client id out of range");
    const Matrix& x = features_[static_cast<size_t>(client)];
    const Vector& y = labels_[static_cast<size_t>(client)];
    Vector grad = Vector::Zero(dim_);
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        const double z = y(n) * x.row(n).dot(theta);
        grad -= (sigmoid(-z) * y(n)) * x.row(n).transpose();
    }
    return grad / static_cast<double>(x.rows()) + l2_reg_ * theta;
}

double LogisticTask::global_loss(const Vector& theta) const {
    double loss = 0.0;
    double total = 0.0;
    for (Eigen::Index k = 0; k < num_clients_; ++k) {
        const Matrix& x = features_[static_cast<size_t>(k)];
        const Vector& y = labels_[static_cast<size_t>(k)];
        for (Eigen::Index n = 0; n < x.rows(); ++n) {
            const double z = y(n) * x.row(n).dot(theta);
            loss += std::log1p(std::exp(-z));
        }
        total += static_cast<double>(x.rows());
    }
    return loss / total + 0.5 * l2_reg_ * theta.squaredNorm();
}

Vector oracle_population_update(const Task& task, const Vector& theta, double eta_local,
                                Eigen::Index local_steps) {
    const Eigen::Index m = task.num_clients();
    Vector d_star = Vector::Zero(task.dim());
    for (Eigen::Index k = 0; k < m; ++k)
        d_star += local_update(task, k, theta, eta_local, local_steps);
    return d_star / static_cast<double>(m);
}

Vector ideal_trajectory(const Task& task, const std::vector<Vector>& theta_trace,
                        const Vector& theta1, double eta, double eta_local,
                        Eigen::Index local_steps, double beta) {
    const Eigen::Index horizon = static_cast<Eigen::Index>(theta_trace.size());
    Vector theta_star = theta1;
    for (Eigen::Index t = 0; t < horizon; ++t) {
        const Vector d_star =
            oracle_population_update(task, theta_trace[static_cast<size_t>(t)], eta_local, local_steps);
        // column sum of M: 1 - beta^(T - t)
        const double weight = 1.0 - std::pow(beta, static_cast<double>(horizon - t));
        theta_star -= eta * weight * d_star;
    }
    return theta_star;
}

TheoremBoundInputs measure_bound_inputs(const Task& task, const std::vector<Vector>& theta_trace,
                                        double eta_local, Eigen::Index local_steps,
                                        Eigen::Index sample_size, Eigen::Index cohort, double eta,
                                        Eigen::Index subsets_per_sample, RngStream& rng) {
    require(!theta_trace.empty(), "measure_bound_inputs: run traces not retained");
    const Eigen::Index horizon = static_cast<Eigen::Index>(theta_trace.size());
    const Eigen::Index m = task.num_clients();
    require(sample_size >= 1 && sample_size <= m, "measure_bound_inputs: bad subset size");

    TheoremBoundInputs out;
    out.cohort = cohort;
    out.horizon = horizon;
    out.eta = eta;

    double g_sq_max = 0.0;
    double rho_sq_max = 0.0;

    // rho is Monte-Carlo sampled on a stride of iterations; S and G use
    // every iteration of the trace.
    const Eigen::Index rho_stride = std::max<Eigen::Index>(1, horizon / 16);

    Matrix updates(m, task.dim());
    for (Eigen::Index t = 0; t < horizon; ++t) {
        const Vector& theta = theta_trace[static_cast<size_t>(t)];
        Vector d_star = Vector::Zero(task.dim());
        for (Eigen::Index k = 0; k < m; ++k) {
            updates.row(k) = local_update(task, k, theta, eta_local, local_steps).transpose();
            d_star += updates.row(k).transpose();
        }
        d_star /= static_cast<double>(m);

        out.s_bound = std::max(out.s_bound, d_star.norm());
        double mean_dev = 0.0;
        Vector dev_sq(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            dev_sq(k) = (updates.row(k).transpose() - d_star).squaredNorm();
            mean_dev += dev_sq(k);
        }
        mean_dev /= static_cast<double>(m);
        g_sq_max = std::max(g_sq_max, mean_dev);

        if (t % rho_stride == 0) {
            for (Eigen::Index rep = 0; rep < subsets_per_sample; ++rep) {
                Vector subset_mean = Vector::Zero(task.dim());
                double subset_dev = 0.0;
                for (Eigen::Index j = 0; j < sample_size; ++j) {
                    const Eigen::Index k =
                        static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(m)));
                    subset_mean += updates.row(k).transpose();
                    subset_dev += dev_sq(k);
                }
                subset_mean /= static_cast<double>(sample_size);
                subset_dev /= static_cast<double>(sample_size);
                const double slack = subset_dev - (subset_mean - d_star).squaredNorm();
                rho_sq_max = std::max(rho_sq_max, slack);
            }
        }
    }

    out.g_bound = std::sqrt(g_sq_max);
    out.rho_hat = std::sqrt(std::max(0.0, rho_sq_max));
    return out;
}

namespace {

double gap_lhs(const Vector& theta_star, const Vector& theta_final, Eigen::Index horizon) {
    return ((theta_star - theta_final) / static_cast<double>(horizon)).squaredNorm();
}

}  // namespace

TheoremGap theorem1_sync_check(const Vector& theta_star, const Vector& theta_final,
                               const TheoremBoundInputs& in) {
    TheoremGap g;
    g.lhs = gap_lhs(theta_star, theta_final, in.horizon);
    g.rhs = 0.5 * in.eta * in.eta * static_cast<double>(in.horizon) * in.g_bound * in.g_bound;
    g.satisfied = g.lhs <= g.rhs;
    return g;
}

TheoremGap theorem1_async_check(const Vector& theta_star, const Vector& theta_final,
                                const TheoremBoundInputs& in) {
    TheoremGap g;
    g.lhs = gap_lhs(theta_star, theta_final, in.horizon);
    const double t = static_cast<double>(in.horizon);
    g.rhs = in.eta * in.eta *
            (2.0 * t * in.s_bound * in.s_bound + t * in.g_bound * in.g_bound +
             2.0 * in.rho_hat * in.rho_hat / static_cast<double>(in.cohort));
    g.satisfied = g.lhs <= g.rhs;
    return g;
}

TheoremGap theorem2_check(const Vector& theta_star, const Vector& theta_final,
                          const TheoremBoundInputs& in, double a_frob_sq) {
    TheoremGap g;
    g.lhs = gap_lhs(theta_star, theta_final, in.horizon);
    const double t = static_cast<double>(in.horizon);
    g.rhs = in.eta * in.eta *
            (t * in.g_bound * in.g_bound +
             2.0 * in.rho_hat * in.rho_hat / (t * static_cast<double>(in.cohort)) * a_frob_sq);
    g.satisfied = g.lhs <= g.rhs;
    return g;
}

TheoremGap theorem_generalized_check(const Vector& theta_star, const Vector& theta_final,
                                     const TheoremBoundInputs& in, double a_frob_sq,
                                     double a_of_t) {
    TheoremGap g;
    g.lhs = gap_lhs(theta_star, theta_final, in.horizon);
    const double t = static_cast<double>(in.horizon);
    g.rhs = in.eta * in.eta *
            (2.0 * in.s_bound * in.s_bound * a_of_t / t + in.g_bound * in.g_bound * t +
             2.0 * in.rho_hat * in.rho_hat / (t * static_cast<double>(in.cohort)) * a_frob_sq);
    g.satisfied = g.lhs <= g.rhs;
    return g;
}

}  // namespace fedma
