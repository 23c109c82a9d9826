#include "prs/io.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "prs/error.hpp"
#include "records.hpp"

namespace prs {

namespace {

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& msg) {
  throw Error(Errc::parse, source + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> lines(std::string_view text) {
  auto out = split(text, '\n');
  for (auto& l : out)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  return out;
}

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

Eigen::VectorXd vector_of(const std::vector<std::string>& items) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(items[i]);
  return v;
}

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(Errc::parse, "invalid unsigned integer '" + std::string(text) + "'");
  return v;
}

// Rethrows value-level parse failures with the file position attached.
template <typename F>
auto at_line(const std::string& source, int line, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    parse_fail(source, line, e.what());
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(Errc::io, "write failed for " + path.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::shortest(v);
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw Error(Errc::parse, "invalid number '" + std::string(text) + "'");
  return v;
}

// ---- subspace spec ----

SubspaceBox parse_subspace(std::string_view text, const std::string& source) {
  SubspaceBox box;
  std::vector<double> lower, upper, base;
  int with_base = 0;
  for (const auto& rec : detail::tokenize(text, source)) {
    detail::RecordReader r(rec, source);
    if (rec.kind == "dim") {
      box.names.push_back(r.text("name"));
      lower.push_back(r.number("lower"));
      upper.push_back(r.number("upper"));
      if (rec.fields.count("base")) {
        base.push_back(r.number("base"));
        ++with_base;
      }
    } else if (rec.kind == "fix") {
      const auto name = r.text("name");
      box.fixed.emplace_back(name, r.number("value"));
    } else {
      r.fail("unknown record '" + rec.kind + "' (expected dim or fix)");
    }
    r.finish();
  }
  if (box.names.empty()) throw Error(Errc::parse, source + ": no dim records");
  if (with_base != 0 && with_base != static_cast<int>(box.names.size()))
    throw Error(Errc::parse, source + ": base given for some dimensions only");
  box.lower = Eigen::Map<Eigen::VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size()));
  box.upper = Eigen::Map<Eigen::VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size()));
  if (with_base) box.base = Eigen::Map<Eigen::VectorXd>(base.data(), static_cast<Eigen::Index>(base.size()));
  try {
    box.validate();
  } catch (const Error& e) {
    throw Error(Errc::parse, source + ": " + e.what());
  }
  return box;
}

SubspaceBox load_subspace(const std::filesystem::path& path) { return parse_subspace(read_text_file(path), path.string()); }

std::string format_subspace(const SubspaceBox& box) {
  std::string out;
  for (std::size_t d = 0; d < box.dim(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    out += "dim name=" + box.names[d] + " lower=" + format_double(box.lower[i]) + " upper=" + format_double(box.upper[i]);
    if (box.base) out += " base=" + format_double((*box.base)[i]);
    out += '\n';
  }
  for (const auto& [name, value] : box.fixed) out += "fix name=" + name + " value=" + format_double(value) + '\n';
  return out;
}

// ---- certificate report ----

std::string format_certificate(const Certificate& c, const ReportExtras& x, bool timing) {
  std::string out = "# stability certificate\n";
  auto kv = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  kv("verdict", verdict_name(c.verdict));
  kv("dims", join(c.box.names, " "));
  kv("lower", join(c.box.lower));
  kv("upper", join(c.box.upper));
  if (c.box.has_frame()) {
    kv("frame_lower", join(c.box.frame_lower));
    kv("frame_upper", join(c.box.frame_upper));
  }
  if (c.box.base) kv("base", join(*c.box.base));
  if (!c.box.fixed.empty()) {
    std::vector<std::string> f;
    for (const auto& [name, value] : c.box.fixed) f.push_back(name + ":" + format_double(value));
    kv("fixed", join(f, " "));
  }
  kv("delta", format_double(c.delta));
  kv("beta_mode", beta_mode_name(c.beta_mode));
  kv("beta", format_double(c.beta));
  kv("p_m", format_double(c.p_m));
  kv("argmax", join(c.argmax));
  kv("max_sigma", format_double(c.max_sigma));
  kv("max_mean", format_double(c.max_mean));
  kv("samples", std::to_string(c.samples));
  kv("oracle_calls", std::to_string(c.oracle_calls));
  kv("termination", stop_reason_name(c.reason));
  kv("policy", infeasible_policy_name(c.policy));
  if (!c.failure.empty()) {
    std::string f = c.failure;
    for (char& ch : f)
      if (ch == '\n' || ch == '\r') ch = ' ';
    kv("failure", f);
  }
  kv("grid_density", std::to_string(c.grid_density));
  kv("grid_points", std::to_string(c.grid_points));
  kv("refine_iterations", std::to_string(c.refine_iterations));
  kv("tol_sigma", format_double(c.tol_sigma));
  kv("tol_p", format_double(c.tol_p));
  kv("seed", std::to_string(c.seed));
  if (timing) kv("wall_ms", format_double(c.wall_ms));
  if (x.alpha) kv("search_alpha", format_double(*x.alpha));
  if (x.anchor_lambda) kv("anchor_lambda", format_double(*x.anchor_lambda));
  if (x.delta_prime) kv("delta_prime", format_double(*x.delta_prime));
  if (x.validation) {
    const auto& v = *x.validation;
    kv("validation_points", std::to_string(v.points));
    if (x.validation_seed) kv("validation_seed", std::to_string(*x.validation_seed));
    kv("validation_unstable", std::to_string(v.unstable));
    kv("validation_above_bound", std::to_string(v.above_bound));
    kv("validation_coverage", format_double(v.coverage()));
    kv("validation_max_lambda", format_double(v.max_lambda));
  }
  return out;
}

CertificateReport parse_certificate(std::string_view text, const std::string& source) {
  std::map<std::string, std::pair<std::string, int>> kv;
  int lineno = 0;
  for (const auto& raw : lines(text)) {
    ++lineno;
    if (raw.empty() || raw[0] == '#') continue;
    const auto eq = raw.find(" = ");
    if (eq == std::string::npos) parse_fail(source, lineno, "expected 'key = value'");
    auto key = raw.substr(0, eq);
    if (!kv.emplace(key, std::make_pair(raw.substr(eq + 3), lineno)).second)
      parse_fail(source, lineno, "duplicate key '" + key + "'");
  }

  std::set<std::string> used;
  auto get = [&](const std::string& key) -> const std::pair<std::string, int>* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };
  auto need = [&](const std::string& key) -> const std::pair<std::string, int>& {
    const auto* v = get(key);
    if (!v) throw Error(Errc::parse, source + ": missing key '" + key + "'");
    return *v;
  };
  auto num = [&](const std::string& key) {
    const auto& [v, l] = need(key);
    return at_line(source, l, [&] { return parse_double(v); });
  };
  auto u64 = [&](const std::string& key) {
    const auto& [v, l] = need(key);
    return at_line(source, l, [&] { return parse_u64(v); });
  };
  auto vec = [&](const std::string& key) {
    const auto& [v, l] = need(key);
    return at_line(source, l, [&] { return vector_of(words(v)); });
  };

  CertificateReport r;
  Certificate& c = r.cert;
  {
    const auto& [v, l] = need("verdict");
    c.verdict = at_line(source, l, [&] { return parse_verdict(v); });
  }
  c.box.names = words(need("dims").first);
  c.box.lower = vec("lower");
  c.box.upper = vec("upper");
  if (get("frame_lower")) {
    c.box.frame_lower = vec("frame_lower");
    c.box.frame_upper = vec("frame_upper");
  }
  if (get("base")) c.box.base = vec("base");
  if (const auto* f = get("fixed")) {
    for (const auto& item : words(f->first)) {
      const auto colon = item.rfind(':');
      if (colon == std::string::npos) parse_fail(source, f->second, "fixed entries must be name:value");
      c.box.fixed.emplace_back(item.substr(0, colon),
                               at_line(source, f->second, [&] { return parse_double(item.substr(colon + 1)); }));
    }
  }
  c.delta = num("delta");
  {
    const auto& [v, l] = need("beta_mode");
    c.beta_mode = at_line(source, l, [&] { return parse_beta_mode(v); });
  }
  c.beta = num("beta");
  c.p_m = num("p_m");
  c.argmax = vec("argmax");
  c.max_sigma = num("max_sigma");
  c.max_mean = num("max_mean");
  c.samples = u64("samples");
  c.oracle_calls = u64("oracle_calls");
  {
    const auto& [v, l] = need("termination");
    c.reason = at_line(source, l, [&] { return parse_stop_reason(v); });
  }
  {
    const auto& [v, l] = need("policy");
    c.policy = at_line(source, l, [&] { return parse_infeasible_policy(v); });
  }
  if (const auto* f = get("failure")) c.failure = f->first;
  c.grid_density = static_cast<int>(u64("grid_density"));
  c.grid_points = u64("grid_points");
  c.refine_iterations = static_cast<int>(u64("refine_iterations"));
  c.tol_sigma = num("tol_sigma");
  c.tol_p = num("tol_p");
  c.seed = u64("seed");
  if (get("wall_ms")) c.wall_ms = num("wall_ms");
  if (get("search_alpha")) r.extras.alpha = num("search_alpha");
  if (get("anchor_lambda")) r.extras.anchor_lambda = num("anchor_lambda");
  if (get("delta_prime")) r.extras.delta_prime = num("delta_prime");
  if (get("validation_points")) {
    CoverageReport v;
    v.points = u64("validation_points");
    v.unstable = u64("validation_unstable");
    v.above_bound = u64("validation_above_bound");
    v.max_lambda = num("validation_max_lambda");
    (void)num("validation_coverage");
    r.extras.validation = v;
    if (get("validation_seed")) r.extras.validation_seed = u64("validation_seed");
  }
  for (const auto& [key, v] : kv)
    if (!used.count(key)) parse_fail(source, v.second, "unknown key '" + key + "'");
  const auto n = static_cast<Eigen::Index>(c.box.names.size());
  if (c.box.lower.size() != n || c.box.upper.size() != n || c.argmax.size() != n)
    throw Error(Errc::parse, source + ": vector lengths do not match dims");
  try {
    c.box.validate();
  } catch (const Error& e) {
    throw Error(Errc::parse, source + ": " + e.what());
  }
  return r;
}

// ---- history ----

std::string format_history(const UcbHistory& h, bool timing) {
  std::string out = "iteration";
  for (const auto& n : h.names) out += "\t" + n;
  out += "\tlambda_c\tacquisition\tsigma_max\tp_m";
  if (timing) out += "\tms";
  out += '\n';
  for (const auto& r : h.records) {
    out += std::to_string(r.iteration);
    for (Eigen::Index d = 0; d < r.x.size(); ++d) out += "\t" + format_double(r.x[d]);
    out += "\t" + format_double(r.observed) + "\t" + format_double(r.acquisition) + "\t" + format_double(r.max_sigma) +
           "\t" + format_double(r.p_estimate);
    if (timing) out += "\t" + format_double(r.elapsed_ms);
    out += '\n';
  }
  return out;
}

UcbHistory parse_history(std::string_view text, const std::string& source) {
  auto ls = lines(text);
  while (!ls.empty() && ls.back().empty()) ls.pop_back();
  if (ls.empty()) throw Error(Errc::parse, source + ": empty history");
  const auto header = split(ls[0], '\t');
  const bool timing = !header.empty() && header.back() == "ms";
  const std::size_t tail = timing ? 5 : 4;
  if (header.size() < tail + 1 || header[0] != "iteration") parse_fail(source, 1, "bad history header");
  const std::vector<std::string> expect = {"lambda_c", "acquisition", "sigma_max", "p_m"};
  const std::size_t dims = header.size() - 1 - tail;
  for (std::size_t i = 0; i < 4; ++i)
    if (header[1 + dims + i] != expect[i]) parse_fail(source, 1, "bad history header");

  UcbHistory h;
  h.names.assign(header.begin() + 1, header.begin() + 1 + static_cast<std::ptrdiff_t>(dims));
  for (std::size_t li = 1; li < ls.size(); ++li) {
    const int lineno = static_cast<int>(li + 1);
    const auto cells = split(ls[li], '\t');
    if (cells.size() != header.size()) parse_fail(source, lineno, "wrong number of columns");
    at_line(source, lineno, [&] {
      UcbRecord r;
      r.iteration = parse_u64(cells[0]);
      r.x.resize(static_cast<Eigen::Index>(dims));
      for (std::size_t d = 0; d < dims; ++d) r.x[static_cast<Eigen::Index>(d)] = parse_double(cells[1 + d]);
      r.observed = parse_double(cells[1 + dims]);
      r.acquisition = parse_double(cells[2 + dims]);
      r.max_sigma = parse_double(cells[3 + dims]);
      r.p_estimate = parse_double(cells[4 + dims]);
      if (timing) r.elapsed_ms = parse_double(cells[5 + dims]);
      h.records.push_back(std::move(r));
      return 0;
    });
  }
  return h;
}

// ---- box table ----

std::string format_box_table(const SubspaceBox& box) {
  std::string out = "variable\tminimum\tmaximum\tdelta\n";
  for (std::size_t d = 0; d < box.dim(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    out += box.names[d] + "\t" + format_double(box.lower[i]) + "\t" + format_double(box.upper[i]) + "\t" +
           format_double(box.upper[i] - box.lower[i]) + "\n";
  }
  return out;
}

SubspaceBox parse_box_table(std::string_view text, const std::string& source) {
  auto ls = lines(text);
  while (!ls.empty() && ls.back().empty()) ls.pop_back();
  if (ls.empty() || ls[0] != "variable\tminimum\tmaximum\tdelta") parse_fail(source, 1, "bad box table header");
  std::vector<std::string> names;
  std::vector<double> lo, hi;
  for (std::size_t li = 1; li < ls.size(); ++li) {
    const int lineno = static_cast<int>(li + 1);
    const auto cells = split(ls[li], '\t');
    if (cells.size() != 4) parse_fail(source, lineno, "expected 4 columns");
    names.push_back(cells[0]);
    lo.push_back(at_line(source, lineno, [&] { return parse_double(cells[1]); }));
    hi.push_back(at_line(source, lineno, [&] { return parse_double(cells[2]); }));
    (void)at_line(source, lineno, [&] { return parse_double(cells[3]); });
  }
  SubspaceBox box = make_box(names, lo, hi);
  try {
    box.validate();
  } catch (const Error& e) {
    throw Error(Errc::parse, source + ": " + e.what());
  }
  return box;
}

// ---- surface ----

Surface evaluate_surface(const GpModel& gp, const SubspaceBox& box, double beta, int density, const Oracle* truth) {
  box.validate();
  if (gp.dim() != box.dim()) throw Error(Errc::invalid_argument, "model and box dimensions differ");
  if (density < 2) throw Error(Errc::invalid_argument, "surface density must be at least 2");
  std::vector<std::size_t> free;
  for (std::size_t d = 0; d < box.dim(); ++d)
    if (!box.degenerate(d)) free.push_back(d);
  if (free.size() != 2) throw Error(Errc::invalid_argument, "surface needs exactly two free dimensions");

  Surface s;
  s.dim1 = box.names[free[0]];
  s.dim2 = box.names[free[1]];
  s.has_truth = truth != nullptr;
  const double sb = std::sqrt(beta);
  const auto n = static_cast<std::size_t>(density);
  for (std::size_t i = 0; i < n * n; ++i) {
    const Eigen::VectorXd x = box.at(grid_point(box, density, i));
    const Posterior p = gp.posterior(box.to_unit(x));
    SurfaceRow row;
    row.c1 = x[static_cast<Eigen::Index>(free[0])];
    row.c2 = x[static_cast<Eigen::Index>(free[1])];
    row.mu = p.mean;
    row.sigma = std::sqrt(p.variance);
    row.ucb = p.mean + sb * row.sigma;
    if (truth) {
      try {
        row.lambda_c = (*truth)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
      } catch (const Error&) {
        row.lambda_c = std::numeric_limits<double>::quiet_NaN();
      }
    }
    s.rows.push_back(row);
  }
  return s;
}

std::string format_surface(const Surface& s) {
  std::string out = s.dim1 + "," + s.dim2 + ",mu,sigma,ucb";
  if (s.has_truth) out += ",lambda_c";
  out += '\n';
  for (const auto& r : s.rows) {
    out += format_double(r.c1) + "," + format_double(r.c2) + "," + format_double(r.mu) + "," + format_double(r.sigma) +
           "," + format_double(r.ucb);
    if (s.has_truth) out += "," + format_double(r.lambda_c);
    out += '\n';
  }
  return out;
}

Surface parse_surface(std::string_view text, const std::string& source) {
  auto ls = lines(text);
  while (!ls.empty() && ls.back().empty()) ls.pop_back();
  if (ls.empty()) throw Error(Errc::parse, source + ": empty surface");
  const auto header = split(ls[0], ',');
  Surface s;
  s.has_truth = header.size() == 6;
  if ((header.size() != 5 && header.size() != 6) || header[2] != "mu" || header[3] != "sigma" || header[4] != "ucb" ||
      (s.has_truth && header[5] != "lambda_c"))
    parse_fail(source, 1, "bad surface header");
  s.dim1 = header[0];
  s.dim2 = header[1];
  for (std::size_t li = 1; li < ls.size(); ++li) {
    const int lineno = static_cast<int>(li + 1);
    const auto cells = split(ls[li], ',');
    if (cells.size() != header.size()) parse_fail(source, lineno, "wrong number of columns");
    s.rows.push_back(at_line(source, lineno, [&] {
      SurfaceRow r;
      r.c1 = parse_double(cells[0]);
      r.c2 = parse_double(cells[1]);
      r.mu = parse_double(cells[2]);
      r.sigma = parse_double(cells[3]);
      r.ucb = parse_double(cells[4]);
      if (s.has_truth) r.lambda_c = parse_double(cells[5]);
      return r;
    }));
  }
  return s;
}

// ---- GP snapshot ----

std::string format_gp(const GpModel& gp) {
  const auto& p = gp.params();
  std::string out = "prs-gp 1\n";
  out += "dim " + std::to_string(gp.dim()) + "\n";
  out += "signal_variance " + format_double(p.signal_variance) + "\n";
  out += "noise_sd " + format_double(p.noise_sd) + "\n";
  if (!p.length_scales.empty()) {
    out += "length_scales";
    for (double l : p.length_scales) out += " " + format_double(l);
    out += "\n";
  }
  out += "samples " + std::to_string(gp.size()) + "\n";
  for (std::size_t i = 0; i < gp.size(); ++i) {
    out += join(gp.input(i)) + " " + format_double(gp.target(i)) + "\n";
  }
  return out;
}

GpModel parse_gp(std::string_view text, const std::string& source) {
  const auto ls = lines(text);
  std::size_t li = 0;
  auto next = [&](const char* what) {
    while (li < ls.size() && words(ls[li]).empty()) ++li;
    if (li >= ls.size()) throw Error(Errc::parse, source + ": missing " + std::string(what));
    return words(ls[li++]);
  };
  auto expect = [&](const char* key, std::size_t min_args) {
    auto w = next(key);
    if (w.empty() || w[0] != key || w.size() < 1 + min_args)
      parse_fail(source, static_cast<int>(li), std::string("expected '") + key + "'");
    return w;
  };
  auto head = next("header");
  if (head.size() != 2 || head[0] != "prs-gp" || head[1] != "1") parse_fail(source, static_cast<int>(li), "not a model snapshot");
  const auto dim = at_line(source, static_cast<int>(li), [&] { return parse_u64(expect("dim", 1)[1]); });
  KernelParams p;
  p.signal_variance = at_line(source, static_cast<int>(li), [&] { return parse_double(expect("signal_variance", 1)[1]); });
  p.noise_sd = at_line(source, static_cast<int>(li), [&] { return parse_double(expect("noise_sd", 1)[1]); });
  auto w = next("samples");
  if (!w.empty() && w[0] == "length_scales") {
    for (std::size_t i = 1; i < w.size(); ++i)
      p.length_scales.push_back(at_line(source, static_cast<int>(li), [&] { return parse_double(w[i]); }));
    w = next("samples");
  }
  if (w.size() != 2 || w[0] != "samples") parse_fail(source, static_cast<int>(li), "expected 'samples'");
  const auto m = at_line(source, static_cast<int>(li), [&] { return parse_u64(w[1]); });
  std::vector<Eigen::VectorXd> inputs;
  std::vector<double> targets;
  for (std::uint64_t i = 0; i < m; ++i) {
    auto row = next("sample");
    if (row.size() != dim + 1) parse_fail(source, static_cast<int>(li), "sample has the wrong number of values");
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    for (std::size_t d = 0; d < dim; ++d)
      x[static_cast<Eigen::Index>(d)] = at_line(source, static_cast<int>(li), [&] { return parse_double(row[d]); });
    inputs.push_back(x);
    targets.push_back(at_line(source, static_cast<int>(li), [&] { return parse_double(row[dim]); }));
  }
  while (li < ls.size())
    if (!words(ls[li++]).empty()) parse_fail(source, static_cast<int>(li), "trailing content");
  try {
    return GpModel::fit(dim, inputs, targets, p);
  } catch (const Error& e) {
    throw Error(e.code(), source + ": " + e.what());
  }
}

}  // namespace prs
