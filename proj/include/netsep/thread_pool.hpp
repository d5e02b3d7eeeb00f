#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace netsep {

// Fixed-size worker pool. Work items must write to disjoint output slots;
// reductions happen on the caller's thread in index order, so results do not
// depend on the worker count.
class ThreadPool {
  public:
    explicit ThreadPool(int threads) {
        if (threads < 1) threads = 1;
        for (int i = 0; i + 1 < threads; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::unique_lock lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // Runs fn(i) for i in [begin, end). Chunked; the calling thread works too.
    template <typename Fn>
    void parallel_for(std::int64_t begin, std::int64_t end, Fn&& fn) {
        const std::int64_t n = end - begin;
        if (n <= 0) return;
        if (workers_.empty() || n == 1) {
            for (std::int64_t i = begin; i < end; ++i) fn(i);
            return;
        }
        const std::int64_t chunks = std::min<std::int64_t>(n, size() * 4);
        const std::int64_t step = (n + chunks - 1) / chunks;
        std::vector<std::function<void()>> tasks;
        for (std::int64_t c = begin; c < end; c += step) {
            const std::int64_t hi = std::min(end, c + step);
            tasks.emplace_back([c, hi, &fn] {
                for (std::int64_t i = c; i < hi; ++i) fn(i);
            });
        }
        run_all(tasks);
    }

  private:
    void run_all(std::vector<std::function<void()>>& tasks) {
        std::size_t remaining = tasks.size();
        std::mutex done_mutex;
        std::condition_variable done_cv;
        {
            std::unique_lock lock(mutex_);
            for (auto& t : tasks) {
                queue_.emplace([&, task = &t] {
                    (*task)();
                    std::unique_lock dl(done_mutex);
                    if (--remaining == 0) done_cv.notify_one();
                });
            }
        }
        cv_.notify_all();
        // Help drain the queue from the calling thread.
        while (true) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex_);
                if (queue_.empty()) break;
                job = std::move(queue_.front());
                queue_.pop();
            }
            job();
        }
        std::unique_lock dl(done_mutex);
        done_cv.wait(dl, [&] { return remaining == 0; });
    }

    void worker_loop() {
        while (true) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
                if (stop_ && queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop();
            }
            job();
        }
    }

    std::vector<std::thread> workers_;
    std::queue<std::function<void()>> queue_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool stop_ = false;
};

}  // namespace netsep
