#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stop_token>
#include <thread>
#include <vector>

namespace curator {

/// Fixed set of worker threads running one parallel loop at a time.
/// Iterations are handed out first-come-first-serve from a shared counter.
/// The calling thread participates as worker 0.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t n_workers) : n_workers_(n_workers == 0 ? 1 : n_workers) {
        for (std::size_t w = 1; w < n_workers_; ++w) {
            threads_.emplace_back([this, w](std::stop_token st) { worker_loop(st, w); });
        }
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lk(mu_);
            shutting_down_ = true;
        }
        for (auto& t : threads_) {
            t.request_stop();
        }
        cv_.notify_all();
    }

    std::size_t size() const noexcept { return n_workers_; }

    /// Runs fn(i, worker) for i in [0, n). Blocks until every iteration is
    /// done; rethrows the first exception raised by any iteration.
    void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
        if (n == 0) {
            return;
        }
        if (n_workers_ == 1 || n == 1) {
            for (std::size_t i = 0; i < n; ++i) {
                fn(i, 0);
            }
            return;
        }
        {
            std::lock_guard lk(mu_);
            job_ = &fn;
            job_size_ = n;
            next_.store(0, std::memory_order_relaxed);
            active_ = n_workers_ - 1;
            error_ = nullptr;
            ++generation_;
        }
        cv_.notify_all();
        run_iterations(0);
        std::unique_lock lk(mu_);
        done_cv_.wait(lk, [this] { return active_ == 0; });
        job_ = nullptr;
        if (error_) {
            std::rethrow_exception(error_);
        }
    }

private:
    void run_iterations(std::size_t worker) {
        const auto& fn = *job_;
        for (;;) {
            const std::size_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= job_size_) {
                break;
            }
            try {
                fn(i, worker);
            } catch (...) {
                std::lock_guard lk(mu_);
                if (!error_) {
                    error_ = std::current_exception();
                }
                next_.store(job_size_, std::memory_order_relaxed);
            }
        }
    }

    void worker_loop(std::stop_token st, std::size_t worker) {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [&] { return shutting_down_ || generation_ != seen; });
                if (shutting_down_ || st.stop_requested()) {
                    return;
                }
                seen = generation_;
            }
            run_iterations(worker);
            {
                std::lock_guard lk(mu_);
                --active_;
            }
            done_cv_.notify_one();
        }
    }

    std::size_t n_workers_;
    std::vector<std::jthread> threads_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
    std::size_t job_size_ = 0;
    std::atomic<std::size_t> next_{0};
    std::size_t active_ = 0;
    std::uint64_t generation_ = 0;
    bool shutting_down_ = false;
    std::exception_ptr error_;
};

}  // namespace curator
