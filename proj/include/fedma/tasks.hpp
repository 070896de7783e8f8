#pragma once

#include "fedma/common.hpp"
#include "fedma/rng.hpp"

#include <memory>
#include <vector>

namespace fedma {

// A federated objective: per-client gradients plus whatever global
// oracle quantities the task can supply in closed form.
class Task {
public:
    virtual ~Task() = default;

    virtual Eigen::Index dim() const = 0;
    virtual Eigen::Index num_clients() const = 0;
    virtual Vector client_gradient(Eigen::Index client, const Vector& theta) const = 0;
    virtual double global_loss(const Vector& theta) const = 0;
    virtual Vector optimum() const = 0;
    virtual Vector initial_point() const { return Vector::Zero(dim()); }
};

// Q full-batch SGD steps on client k's objective from theta_received;
// returns Delta = theta_received - theta'.
Vector local_update(const Task& task, Eigen::Index client, const Vector& theta_received,
                    double eta_local, Eigen::Index local_steps);

// f(theta) = (1/m) sum_k (1/2)||theta - c_k||^2 with client centers
// c_k = c_star + heterogeneity * N(0, I). Unique minimizer: mean of c_k.
class QuadraticTask : public Task {
public:
    QuadraticTask(Eigen::Index dim, Eigen::Index num_clients, double heterogeneity,
                  std::uint64_t seed);

    Eigen::Index dim() const override { return dim_; }
    Eigen::Index num_clients() const override { return static_cast<Eigen::Index>(centers_.size()); }
    Vector client_gradient(Eigen::Index client, const Vector& theta) const override;
    double global_loss(const Vector& theta) const override;
    Vector optimum() const override { return mean_center_; }

    const Vector& center(Eigen::Index client) const { return centers_[static_cast<size_t>(client)]; }

private:
    Eigen::Index dim_;
    std::vector<Vector> centers_;
    Vector mean_center_;
};

// L2-regularized logistic regression on synthetic per-client data with
// optional label noise. The optimum is found once by Newton iteration
// on the global objective.
class LogisticTask : public Task {
public:
    LogisticTask(Eigen::Index dim, Eigen::Index num_clients, Eigen::Index samples_per_client,
                 double heterogeneity, double label_noise, std::uint64_t seed,
                 double l2_reg = 1e-3);

    Eigen::Index dim() const override { return dim_; }
    Eigen::Index num_clients() const override { return num_clients_; }
    Vector client_gradient(Eigen::Index client, const Vector& theta) const override;
    double global_loss(const Vector& theta) const override;
    Vector optimum() const override { return optimum_; }

private:
    Eigen::Index dim_;
    Eigen::Index num_clients_;
    std::vector<Matrix> features_;  // per client: n x d
    std::vector<Vector> labels_;    // per client: +-1
    double l2_reg_;
    Vector optimum_;
};

// d*_t: the exact all-client average update from theta.
Vector oracle_population_update(const Task& task, const Vector& theta, double eta_local,
                                Eigen::Index local_steps);

// theta*_{T+1} = theta_1 - eta * D* M^T 1, with the columns of D*
// evaluated along the supplied theta trace (the run under comparison).
Vector ideal_trajectory(const Task& task, const std::vector<Vector>& theta_trace,
                        const Vector& theta1, double eta, double eta_local,
                        Eigen::Index local_steps, double beta);

struct TheoremBoundInputs {
    double s_bound = 0.0;    // max_t ||d*_t||
    double g_bound = 0.0;    // sqrt(max_t mean_k ||Delta_k - d*_t||^2)
    double rho_hat = 0.0;    // Monte-Carlo subset-sampling slack (estimated)
    Eigen::Index cohort = 0;
    Eigen::Index horizon = 0;
    double eta = 0.0;
};

// Empirical S, G maxima over the trace plus the rho Monte-Carlo
// estimate: max over random size-K subsets of
// (mean_k ||Delta_k - d*||^2 - ||subset mean - d*||^2)_+, square-rooted.
TheoremBoundInputs measure_bound_inputs(const Task& task, const std::vector<Vector>& theta_trace,
                                        double eta_local, Eigen::Index local_steps,
                                        Eigen::Index sample_size, Eigen::Index cohort, double eta,
                                        Eigen::Index subsets_per_sample, RngStream& rng);

struct TheoremGap {
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
};

// ||(theta_star - theta_final)/T||^2 against the cited upper bounds.
TheoremGap theorem1_sync_check(const Vector& theta_star, const Vector& theta_final,
                               const TheoremBoundInputs& in);
TheoremGap theorem1_async_check(const Vector& theta_star, const Vector& theta_final,
                                const TheoremBoundInputs& in);
TheoremGap theorem2_check(const Vector& theta_star, const Vector& theta_final,
                          const TheoremBoundInputs& in, double a_frob_sq);
// Generalized bound with the A(T) = sum_i i * (1 - alpha_i) term.
TheoremGap theorem_generalized_check(const Vector& theta_star, const Vector& theta_final,
                                     const TheoremBoundInputs& in, double a_frob_sq,
                                     double a_of_t);

}  // namespace fedma
