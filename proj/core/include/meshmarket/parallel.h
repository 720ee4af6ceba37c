#ifndef MESHMARKET_PARALLEL_H_
#define MESHMARKET_PARALLEL_H_

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace meshmarket {

// Fixed set of worker threads executing barrier-synchronized parallel loops.
// The calling thread participates, so a pool of size 1 runs inline.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return workers_.size() + 1; }

  // Calls body(i) for every i in [0, n) and returns once all calls finished.
  // The first exception thrown by any call is rethrown here.
  void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

 private:
  void WorkerLoop();
  void Drain();

  std::vector<std::jthread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::size_t count_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t busy_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

// Thread count from MESHMARKET_THREADS when set, else `requested`, else all
// hardware threads.
std::size_t ResolveThreadCount(std::size_t requested = 0);

}  // namespace meshmarket

#endif  // MESHMARKET_PARALLEL_H_
