#pragma once

#include <stdexcept>
#include <string>

namespace skelrt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tree, kernel or argument declaration violates its invariants.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

/// epu(V) is not a multiple of nu(V, K) for some kernel K touching V.
class EpuNuViolation : public InvalidSpec {
 public:
  EpuNuViolation(std::string kernel, std::string vector)
      : InvalidSpec("epu of vector '" + vector + "' is not a multiple of the work-per-thread of kernel '" +
                    kernel + "'"),
        kernel_(std::move(kernel)),
        vector_(std::move(vector)) {}

  const std::string& kernel() const noexcept { return kernel_; }
  const std::string& vector() const noexcept { return vector_; }

 private:
  std::string kernel_;
  std::string vector_;
};

class MissingIterationCount : public Error {
 public:
  explicit MissingIterationCount(const std::string& loop)
      : Error("no iteration count given for loop '" + loop + "'") {}
};

class InfeasiblePartition : public Error {
 public:
  using Error::Error;
};

class UnknownKernelThroughput : public Error {
 public:
  UnknownKernelThroughput(const std::string& device, const std::string& kernel)
      : Error("device '" + device + "' declares no throughput for kernel '" + kernel + "'") {}
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class PersistenceFailure : public Error {
 public:
  using Error::Error;
};

/// The workload distribution generator has nothing left to transfer.
class Exhausted : public Error {
 public:
  Exhausted() : Error("transferable share is below one granule") {}
};

}  // namespace skelrt
