#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prs/box.hpp"
#include "prs/certify.hpp"
#include "prs/gp.hpp"
#include "prs/ucb.hpp"

namespace prs {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest round-trip decimal form, with "inf", "-inf" and "nan" spelled out.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Subspace spec: "dim name=.. lower=.. upper=.. [base=..]" and "fix name=.. value=.." lines.
SubspaceBox parse_subspace(std::string_view text, const std::string& source = "<string>");
SubspaceBox load_subspace(const std::filesystem::path& path);
std::string format_subspace(const SubspaceBox& box);

/// Optional sections appended to a certificate report.
struct ReportExtras {
  std::optional<double> alpha;
  std::optional<double> anchor_lambda;
  std::optional<double> delta_prime;
  std::optional<CoverageReport> validation;
  std::optional<std::uint64_t> validation_seed;
};

struct CertificateReport {
  Certificate cert;
  ReportExtras extras;
};

/// "key = value" lines. wall_ms is written only when `timing` is set so that
/// reports of identical runs are byte-identical.
std::string format_certificate(const Certificate& cert, const ReportExtras& extras = {}, bool timing = false);
CertificateReport parse_certificate(std::string_view text, const std::string& source = "<string>");

/// Tab-separated: iteration, one column per dimension, lambda_c, acquisition,
/// sigma_max, p_m, and ms when `timing` is set.
std::string format_history(const UcbHistory& history, bool timing = false);
UcbHistory parse_history(std::string_view text, const std::string& source = "<string>");

/// Tab-separated variable, minimum, maximum, delta.
std::string format_box_table(const SubspaceBox& box);
SubspaceBox parse_box_table(std::string_view text, const std::string& source = "<string>");

struct SurfaceRow {
  double c1 = 0.0;
  double c2 = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double ucb = 0.0;
  double lambda_c = 0.0;  // only meaningful when Surface::has_truth
};

struct Surface {
  std::string dim1;
  std::string dim2;
  bool has_truth = false;
  std::vector<SurfaceRow> rows;
};

/// Posterior over a density x density grid of a box with exactly two free
/// dimensions (first free dimension outer). Uses the same grid points and
/// arithmetic as the certificate scan. `truth` adds lambda_c (NaN where the
/// oracle fails).
Surface evaluate_surface(const GpModel& gp, const SubspaceBox& box, double beta, int density,
                         const Oracle* truth = nullptr);

/// CSV with header "<dim1>,<dim2>,mu,sigma,ucb[,lambda_c]".
std::string format_surface(const Surface& s);
Surface parse_surface(std::string_view text, const std::string& source = "<string>");

/// Text snapshot of a model: kernel parameters, then one sample per line.
std::string format_gp(const GpModel& gp);
GpModel parse_gp(std::string_view text, const std::string& source = "<string>");

}  // namespace prs
