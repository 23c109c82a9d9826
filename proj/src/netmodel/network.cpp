#include "prs/network.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "prs/error.hpp"
#include "../io/records.hpp"

namespace prs {

using detail::Record;
using detail::RecordReader;
using detail::tokenize;

namespace {

BusType parse_bus_type(RecordReader& r) {
  const auto t = r.text("type");
  if (t == "slack") return BusType::slack;
  if (t == "pv") return BusType::pv;
  if (t == "pq") return BusType::pq;
  r.fail("bus type must be slack, pv or pq (got '" + t + "')");
}

const char* bus_type_name(BusType t) {
  switch (t) {
    case BusType::slack: return "slack";
    case BusType::pv: return "pv";
    case BusType::pq: return "pq";
  }
  return "pq";
}

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::invalid_model, msg); }

}  // namespace

void NetworkModel::validate() const {
  if (!(base_mva > 0.0)) invalid("base_mva must be positive");
  if (!(freq_hz > 0.0)) invalid("frequency must be positive");
  if (buses.empty()) invalid("network has no buses");

  std::set<int> ids;
  int slack_count = 0;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) invalid("duplicate bus id " + std::to_string(b.id));
    if (b.type == BusType::slack) ++slack_count;
    if (!(b.v_set > 0.0) || !std::isfinite(b.v_set))
      invalid("bus " + std::to_string(b.id) + ": voltage setpoint must be positive");
  }
  if (slack_count == 0) invalid("no slack bus");
  if (slack_count > 1) invalid("multiple slack buses");

  for (const auto& br : branches) {
    if (!ids.count(br.from) || !ids.count(br.to))
      invalid("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
              " references an unknown bus");
    if (br.from == br.to) invalid("branch connects bus " + std::to_string(br.from) + " to itself");
    const double z2 = br.r * br.r + br.x * br.x;
    if (!(z2 > 0.0) || !std::isfinite(z2) || !std::isfinite(br.b))
      invalid("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
              ": admittance is not finite");
  }

  std::set<int> gen_buses;
  for (std::size_t k = 0; k < machines.size(); ++k) {
    const auto& m = machines[k];
    const std::string who = "machine " + std::to_string(k + 1) + " (bus " + std::to_string(m.bus) + ")";
    auto bi = find_bus(m.bus);
    if (!bi) invalid(who + ": unknown bus");
    if (buses[*bi].type == BusType::pq) invalid(who + ": bus must be slack or pv");
    if (!gen_buses.insert(m.bus).second) invalid(who + ": more than one machine on the bus");
    if (!(m.h > 0.0)) invalid(who + ": inertia H must be positive");
    if (!(m.td0_p > 0.0)) invalid(who + ": Td0' must be positive");
    if (!(m.tq0_p > 0.0)) invalid(who + ": Tq0' must be positive");
    if (m.d < 0.0) invalid(who + ": damping must be non-negative");
    if (!(m.xd_p > 0.0) || !(m.xq_p > 0.0) || m.xd < m.xd_p || m.xq < m.xq_p)
      invalid(who + ": reactances must satisfy 0 < X' <= X");
    if (m.rs < 0.0) invalid(who + ": stator resistance must be non-negative");
    const auto& e = m.exciter;
    if (!(e.ka > 0.0) || !(e.ta > 0.0) || !(e.te > 0.0) || !(e.tf > 0.0))
      invalid(who + ": exciter gains and time constants must be positive");
  }
  for (const auto& b : buses)
    if (b.type != BusType::pq && !gen_buses.count(b.id))
      invalid("bus " + std::to_string(b.id) + " is " + bus_type_name(b.type) + " but has no machine");

  std::set<int> load_buses;
  for (const auto& l : loads) {
    if (!ids.count(l.bus)) invalid("load at unknown bus " + std::to_string(l.bus));
    if (!load_buses.insert(l.bus).second) invalid("more than one load on bus " + std::to_string(l.bus));
    if (!std::isfinite(l.p) || !std::isfinite(l.q))
      invalid("load at bus " + std::to_string(l.bus) + " is not finite");
  }
}

std::optional<int> NetworkModel::find_bus(int bus_id) const noexcept {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  return std::nullopt;
}

int NetworkModel::bus_index(int bus_id) const {
  if (auto i = find_bus(bus_id)) return *i;
  throw Error(Errc::invalid_argument, "unknown bus " + std::to_string(bus_id));
}

std::optional<int> NetworkModel::machine_at(int bus_id) const noexcept {
  for (std::size_t k = 0; k < machines.size(); ++k)
    if (machines[k].bus == bus_id) return static_cast<int>(k);
  return std::nullopt;
}

std::optional<int> NetworkModel::load_at(int bus_id) const noexcept {
  for (std::size_t k = 0; k < loads.size(); ++k)
    if (loads[k].bus == bus_id) return static_cast<int>(k);
  return std::nullopt;
}

int NetworkModel::slack_bus_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].type == BusType::slack) return static_cast<int>(i);
  invalid("no slack bus");
}

int NetworkModel::slack_machine_index() const {
  return *machine_at(buses[slack_bus_index()].id);
}

double NetworkModel::omega_s() const noexcept { return 2.0 * std::numbers::pi * freq_hz; }

ComplexMatrix NetworkModel::admittance() const {
  const auto n = static_cast<Eigen::Index>(buses.size());
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (const auto& br : branches) {
    const int i = bus_index(br.from);
    const int k = bus_index(br.to);
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> ysh(0.0, br.b / 2.0);
    y(i, i) += ys + ysh;
    y(k, k) += ys + ysh;
    y(i, k) -= ys;
    y(k, i) -= ys;
  }
  return y;
}

NetworkModel parse_network(std::string_view text, const std::string& source) {
  NetworkModel net;
  std::map<int, Exciter> exciters;
  std::map<int, int> exciter_lines;
  bool saw_system = false;

  for (const auto& rec : tokenize(text, source)) {
    RecordReader r(rec, source);
    if (rec.kind == "system") {
      if (saw_system) r.fail("duplicate 'system' record");
      saw_system = true;
      net.base_mva = r.number_or("base_mva", 100.0);
      net.freq_hz = r.number_or("freq", 60.0);
    } else if (rec.kind == "bus") {
      Bus b;
      b.id = r.integer("id");
      b.type = parse_bus_type(r);
      b.v_set = r.number_or("v", 1.0);
      net.buses.push_back(b);
    } else if (rec.kind == "branch") {
      Branch br;
      br.from = r.integer("from");
      br.to = r.integer("to");
      br.r = r.number_or("r", 0.0);
      br.x = r.number("x");
      br.b = r.number_or("b", 0.0);
      net.branches.push_back(br);
    } else if (rec.kind == "gen") {
      Machine m;
      m.bus = r.integer("bus");
      m.p_set = r.number_or("p", 0.0);
      m.h = r.number("H");
      m.d = r.number_or("D", 0.0);
      m.xd = r.number("xd");
      m.xd_p = r.number("xd_p");
      m.xq = r.number("xq");
      m.xq_p = r.number("xq_p");
      m.td0_p = r.number("td0_p");
      m.tq0_p = r.number("tq0_p");
      m.rs = r.number_or("rs", 0.0);
      net.machines.push_back(m);
    } else if (rec.kind == "exciter") {
      Exciter e;
      const int bus = r.integer("bus");
      e.ka = r.number("ka");
      e.ta = r.number("ta");
      e.ke = r.number("ke");
      e.te = r.number("te");
      e.kf = r.number("kf");
      e.tf = r.number("tf");
      e.sat_a = r.number_or("sat_a", 0.0);
      e.sat_b = r.number_or("sat_b", 0.0);
      if (exciters.count(bus)) r.fail("duplicate exciter for bus " + std::to_string(bus));
      exciters[bus] = e;
      exciter_lines[bus] = rec.line;
    } else if (rec.kind == "load") {
      Load l;
      l.bus = r.integer("bus");
      l.p = r.number("p");
      l.q = r.number("q");
      net.loads.push_back(l);
    } else {
      r.fail("unknown record type '" + rec.kind + "'");
    }
    r.finish();
  }

  for (auto& m : net.machines) {
    auto it = exciters.find(m.bus);
    if (it == exciters.end())
      throw Error(Errc::parse, source + ": machine at bus " + std::to_string(m.bus) + " has no exciter record");
    m.exciter = it->second;
    exciters.erase(it);
  }
  if (!exciters.empty()) {
    const int bus = exciters.begin()->first;
    throw Error(Errc::parse, source + ":" + std::to_string(exciter_lines[bus]) +
                                 ": exciter for bus " + std::to_string(bus) + " has no machine");
  }

  net.validate();
  return net;
}

NetworkModel load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open network file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str(), path.string());
}

std::string format_network(const NetworkModel& net) {
  const auto n = detail::shortest;
  std::ostringstream out;
  out << "system base_mva=" << n(net.base_mva) << " freq=" << n(net.freq_hz) << "\n";
  for (const auto& b : net.buses)
    out << "bus id=" << b.id << " type=" << bus_type_name(b.type) << " v=" << n(b.v_set) << "\n";
  for (const auto& br : net.branches)
    out << "branch from=" << br.from << " to=" << br.to << " r=" << n(br.r) << " x=" << n(br.x) << " b=" << n(br.b)
        << "\n";
  for (const auto& m : net.machines) {
    out << "gen bus=" << m.bus << " p=" << n(m.p_set) << " H=" << n(m.h) << " D=" << n(m.d) << " xd=" << n(m.xd)
        << " xd_p=" << n(m.xd_p) << " xq=" << n(m.xq) << " xq_p=" << n(m.xq_p) << " td0_p=" << n(m.td0_p)
        << " tq0_p=" << n(m.tq0_p) << " rs=" << n(m.rs) << "\n";
    const auto& e = m.exciter;
    out << "exciter bus=" << m.bus << " ka=" << n(e.ka) << " ta=" << n(e.ta) << " ke=" << n(e.ke) << " te=" << n(e.te)
        << " kf=" << n(e.kf) << " tf=" << n(e.tf) << " sat_a=" << n(e.sat_a) << " sat_b=" << n(e.sat_b) << "\n";
  }
  for (const auto& l : net.loads) out << "load bus=" << l.bus << " p=" << n(l.p) << " q=" << n(l.q) << "\n";
  return out.str();
}

void save_network(const NetworkModel& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write network file '" + path.string() + "'");
  out << format_network(net);
}

}  // namespace prs
