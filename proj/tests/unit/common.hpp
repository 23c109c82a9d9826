#pragma once

#include <string>

#include "prs/network.hpp"
#include "prs/powerflow.hpp"

inline std::string data_path(const std::string& rel) { return std::string(PRS_DATA_DIR) + "/" + rel; }

inline const prs::NetworkModel& calibrated_net() {
  static const prs::NetworkModel net = prs::load_network(data_path("wscc9.net"));
  return net;
}

inline const prs::NetworkModel& standard_net() {
  static const prs::NetworkModel net = prs::load_network(data_path("wscc9_standard.net"));
  return net;
}

inline prs::OperatingTarget base_target() {
  return {{"Pg2", 2.922}, {"Pg3", 1.523}, {"Vm1", 1.04}, {"Vm2", 1.025}, {"Vm3", 1.025}};
}
