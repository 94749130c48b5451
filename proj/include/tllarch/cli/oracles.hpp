#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "tllarch/types.hpp"

namespace tllarch::cli {

/// Source of controller values. Implementations are safe to call from
/// several threads.
class ControllerOracle {
 public:
  virtual ~ControllerOracle() = default;
  virtual std::vector<Vec> evaluate(const std::vector<Vec>& points) = 0;
  virtual nlohmann::json describe() const = 0;
  /// Declared Lipschitz constant, when the source knows one.
  virtual double k_lip() const { return 0.0; }
  std::size_t n = 0;
  std::size_t m = 0;
};

/// {"builtin": name}, {"csv": path} or {"command": shell command}.
/// Throws ConfigError for unknown or malformed specs.
std::unique_ptr<ControllerOracle> make_oracle(const nlohmann::json& desc, std::size_t n, std::size_t m);

/// Point-wise view of an oracle. The oracle must outlive the function.
VectorFunction as_function(ControllerOracle& oracle);

/// Lookup table answering exactly at `points`; OracleFailure elsewhere.
VectorFunction tabulated(std::vector<Vec> points, std::vector<Vec> values);

/// Rows of n inputs followed by m outputs; an optional non-numeric header is
/// skipped.
class CsvOracle : public ControllerOracle {
 public:
  CsvOracle(const std::string& path, std::size_t n, std::size_t m);
  std::vector<Vec> evaluate(const std::vector<Vec>& points) override;
  nlohmann::json describe() const override;

 private:
  std::string path_;
  std::vector<Vec> inputs_;
  std::vector<Vec> outputs_;
};

/// Child process speaking line-delimited JSON: one {"x": [...]} line per
/// point on stdin, one {"u": [...]} (or bare array) line back on stdout.
class SubprocessOracle : public ControllerOracle {
 public:
  SubprocessOracle(std::string command, std::size_t n, std::size_t m, std::size_t batch = 256);
  ~SubprocessOracle() override;
  SubprocessOracle(const SubprocessOracle&) = delete;
  SubprocessOracle& operator=(const SubprocessOracle&) = delete;

  std::vector<Vec> evaluate(const std::vector<Vec>& points) override;
  nlohmann::json describe() const override;

 private:
  std::string read_line();

  std::string command_;
  std::size_t batch_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::mutex mutex_;
};

}  // namespace tllarch::cli
