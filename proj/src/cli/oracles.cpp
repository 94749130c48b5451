#include "tllarch/cli/oracles.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tllarch/error.hpp"
#include "tllarch/models.hpp"

namespace tllarch::cli {
namespace {

class BuiltinOracle : public ControllerOracle {
 public:
  explicit BuiltinOracle(NamedController c) : c_(std::move(c)) {}
  std::vector<Vec> evaluate(const std::vector<Vec>& points) override {
    std::vector<Vec> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(c_.fn(p));
    return out;
  }
  nlohmann::json describe() const override { return {{"builtin", c_.name}, {"K_lip", c_.k_lip}}; }
  double k_lip() const override { return c_.k_lip; }

 private:
  NamedController c_;
};

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (used != cell.size()) throw std::invalid_argument(cell);
    row.push_back(v);
  }
  return row;
}

bool close_to(const Vec& a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-9 * (1.0 + std::abs(a[i]))) return false;
  }
  return true;
}

Vec parse_reply(const std::string& line, std::size_t m) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::OracleFailure, std::string("unparseable oracle reply: ") + e.what());
  }
  const nlohmann::json& arr = doc.is_object() && doc.contains("u") ? doc["u"] : doc;
  if (!arr.is_array() || arr.size() != m) throw Error(ErrorCode::OracleFailure, "oracle reply has the wrong shape: " + line);
  Vec u;
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::OracleFailure, "oracle reply is not numeric: " + line);
    u.push_back(v.get<double>());
  }
  return u;
}

void write_all(int fd, const std::string& text) {
  std::size_t done = 0;
  while (done < text.size()) {
    const ssize_t k = ::write(fd, text.data() + done, text.size() - done);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::OracleFailure, std::string("writing to oracle process: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(k);
  }
}

}  // namespace

std::unique_ptr<ControllerOracle> make_oracle(const nlohmann::json& desc, std::size_t n, std::size_t m) {
  if (!desc.is_object()) throw Error(ErrorCode::ConfigError, "oracle must be an object");
  std::unique_ptr<ControllerOracle> out;
  if (desc.contains("builtin")) {
    const auto name = desc["builtin"].get<std::string>();
    auto c = find_controller(name);
    if (!c) throw Error(ErrorCode::ConfigError, "unknown builtin controller " + name);
    if (c->n != n || c->m != m) {
      throw Error(ErrorCode::ConfigError, "controller " + name + " maps R^" + std::to_string(c->n) + " to R^" +
                                              std::to_string(c->m));
    }
    out = std::make_unique<BuiltinOracle>(*c);
  } else if (desc.contains("csv")) {
    out = std::make_unique<CsvOracle>(desc["csv"].get<std::string>(), n, m);
  } else if (desc.contains("command")) {
    out = std::make_unique<SubprocessOracle>(desc["command"].get<std::string>(), n, m,
                                             desc.value("batch", std::size_t{256}));
  } else {
    throw Error(ErrorCode::ConfigError, "oracle needs one of builtin, csv or command");
  }
  out->n = n;
  out->m = m;
  return out;
}

VectorFunction as_function(ControllerOracle& oracle) {
  return [&oracle](std::span<const double> x) {
    return std::move(oracle.evaluate({Vec(x.begin(), x.end())})[0]);
  };
}

VectorFunction tabulated(std::vector<Vec> points, std::vector<Vec> values) {
  auto table = std::make_shared<std::map<Vec, Vec>>();
  for (std::size_t k = 0; k < points.size(); ++k) (*table)[points[k]] = values[k];
  return [table](std::span<const double> x) {
    auto it = table->find(Vec(x.begin(), x.end()));
    if (it == table->end()) throw Error(ErrorCode::OracleFailure, "no tabulated value at the requested point");
    return it->second;
  };
}

CsvOracle::CsvOracle(const std::string& path, std::size_t n, std::size_t m) : path_(path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Vec row;
    try {
      row = parse_row(line);
    } catch (const std::exception&) {
      if (line_no == 1) continue;
      throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(line_no) + ": not numeric");
    }
    if (row.size() != n + m) {
      throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(n + m) + " columns");
    }
    inputs_.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n));
    outputs_.emplace_back(row.begin() + static_cast<std::ptrdiff_t>(n), row.end());
  }
  if (inputs_.empty()) throw Error(ErrorCode::ConfigError, path + " has no rows");
}

std::vector<Vec> CsvOracle::evaluate(const std::vector<Vec>& points) {
  std::vector<Vec> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    std::size_t k = 0;
    while (k < inputs_.size() && !close_to(inputs_[k], p)) ++k;
    if (k == inputs_.size()) throw Error(ErrorCode::OracleFailure, path_ + " has no row for a requested point");
    out.push_back(outputs_[k]);
  }
  return out;
}

nlohmann::json CsvOracle::describe() const { return {{"csv", path_}, {"rows", inputs_.size()}}; }

SubprocessOracle::SubprocessOracle(std::string command, std::size_t n, std::size_t m, std::size_t batch)
    : command_(std::move(command)), batch_(std::max<std::size_t>(1, batch)) {
  this->n = n;
  this->m = m;
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) throw Error(ErrorCode::OracleFailure, "pipe failed");
  pid_ = ::fork();
  if (pid_ < 0) throw Error(ErrorCode::OracleFailure, "fork failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  // A dead child must surface as an error, not kill the tool.
  ::signal(SIGPIPE, SIG_IGN);
}

SubprocessOracle::~SubprocessOracle() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::string SubprocessOracle::read_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const ssize_t k = ::read(from_child_, chunk, sizeof chunk);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) throw Error(ErrorCode::OracleFailure, "oracle process closed its output: " + command_);
    buffer_.append(chunk, static_cast<std::size_t>(k));
  }
}

std::vector<Vec> SubprocessOracle::evaluate(const std::vector<Vec>& points) {
  std::lock_guard lock(mutex_);
  std::vector<Vec> out;
  out.reserve(points.size());
  for (std::size_t start = 0; start < points.size(); start += batch_) {
    const std::size_t end = std::min(points.size(), start + batch_);
    std::string request;
    for (std::size_t k = start; k < end; ++k) request += nlohmann::json{{"x", points[k]}}.dump() + "\n";
    write_all(to_child_, request);
    for (std::size_t k = start; k < end; ++k) out.push_back(parse_reply(read_line(), m));
  }
  return out;
}

nlohmann::json SubprocessOracle::describe() const { return {{"command", command_}, {"batch", batch_}}; }

}  // namespace tllarch::cli
