#pragma once

// A child `iglu serve` process whose first stdout line is the JSON banner.

#include <csignal>
#include <string>
#include <vector>

#include <boost/process.hpp>
#include <nlohmann/json.hpp>

namespace oracle {

class ServeProcess {
 public:
  explicit ServeProcess(const std::vector<std::string>& args)
      : child_(std::string(IGLU_BINARY), boost::process::args(args), boost::process::std_out > out_) {
    std::string line;
    if (!std::getline(out_, line)) throw std::runtime_error("serve exited before its banner");
    banner_ = nlohmann::json::parse(line);
  }
  ~ServeProcess() {
    if (child_.running()) child_.terminate();
  }

  const nlohmann::json& banner() const { return banner_; }
  std::uint16_t wire_port() const { return banner_.at("wire").at("port").get<std::uint16_t>(); }
  std::uint16_t admin_port() const { return banner_.at("admin").at("port").get<std::uint16_t>(); }

  /// SIGTERM, then the exit code and the remaining stdout lines.
  int stop(std::vector<std::string>* rest = nullptr) {
    ::kill(child_.id(), SIGTERM);
    std::string line;
    while (std::getline(out_, line)) {
      if (rest) rest->push_back(line);
    }
    child_.wait();
    return child_.exit_code();
  }

 private:
  boost::process::ipstream out_;
  boost::process::child child_;
  nlohmann::json banner_;
};

}  // namespace oracle
