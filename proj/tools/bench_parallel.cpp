// Compares the serial reference EM iteration against the OpenMP kernel
// and the item-similarity construction against its threaded variant.
#include <chrono>
#include <cstdlib>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "blockrec/baselines.hpp"
#include "blockrec/mmsbm.hpp"
#include "blockrec/synthetic.hpp"

using namespace blockrec;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

RatingsTable make_data(std::size_t n_users, std::size_t n_items, double density) {
    auto planted = mmsbm::random_init(
        RatingsTable(n_users, n_items, RatingScale::integers(1, 5), {}), 4, 4, 99);
    return generate_synthetic(planted, RatingScale::integers(1, 5), density, 12345);
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n_users = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1500;
    std::size_t n_items = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1200;
    double density = argc > 3 ? std::strtod(argv[3], nullptr) : 0.05;
    int reps = argc > 4 ? std::atoi(argv[4]) : 5;

    int max_threads = 1;
#ifdef _OPENMP
    max_threads = omp_get_max_threads();
#endif
    auto data = make_data(n_users, n_items, density);
    std::cout << "dataset: " << data.n_users() << " users, " << data.n_items() << " items, "
              << data.n_observations() << " ratings; " << max_threads
              << " threads available\n\n";

    // EM iteration: serial reference vs parallel kernel.
    auto init = mmsbm::random_init(data, 10, 10, 7);
    auto serial_model = init, parallel_model = init;
    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) mmsbm::em_iteration_serial(serial_model, data);
    double t_serial = seconds_since(t0) / reps;
    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) mmsbm::em_iteration_parallel(parallel_model, data, 0);
    double t_parallel = seconds_since(t0) / reps;

    double max_diff = 0.0;
    for (std::size_t j = 0; j < serial_model.theta.size(); ++j)
        max_diff = std::max(max_diff,
                            std::fabs(serial_model.theta[j] - parallel_model.theta[j]));
    for (std::size_t j = 0; j < serial_model.q.size(); ++j)
        max_diff = std::max(max_diff, std::fabs(serial_model.q[j] - parallel_model.q[j]));

    std::cout << "em iteration (K=L=10, " << reps << " reps)\n"
              << "  serial reference: " << t_serial << " s/iter\n"
              << "  openmp kernel:    " << t_parallel << " s/iter  (speedup "
              << t_serial / t_parallel << "x)\n"
              << "  max parameter difference after " << reps << " iterations: " << max_diff
              << "\n\n";
    if (max_diff > 1e-12) {
        std::cerr << "error: kernel diverged from the reference\n";
        return 1;
    }

    // Item-similarity construction.
    t0 = Clock::now();
    baselines::ItemItemModel ii_serial(data, 50, 1);
    double t_ii_serial = seconds_since(t0);
    t0 = Clock::now();
    baselines::ItemItemModel ii_parallel(data, 50, 0);
    double t_ii_parallel = seconds_since(t0);
    bool same = true;
    for (std::size_t i = 0; i < data.n_items(); ++i)
        same = same && ii_serial.neighbors(i) == ii_parallel.neighbors(i);
    std::cout << "item-item neighbor lists (k=50)\n"
              << "  serial:   " << t_ii_serial << " s\n"
              << "  threaded: " << t_ii_parallel << " s  (speedup "
              << t_ii_serial / t_ii_parallel << "x)\n"
              << "  neighbor lists identical: " << (same ? "yes" : "NO") << '\n';
    if (!same) {
        std::cerr << "error: threaded neighbor lists differ\n";
        return 1;
    }
    return 0;
}
