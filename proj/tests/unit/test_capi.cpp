#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "prs/prs.h"

namespace {

int bowl(void*, const double* x, size_t dim, double* out) {
  double s = 0.0;
  for (size_t i = 0; i < dim; ++i) s += x[i] * x[i];
  *out = s - 0.25;
  return 0;
}

int refuse_far(void* user, const double* x, size_t, double* out) {
  ++*static_cast<int*>(user);
  if (x[0] > 0.9) return 1;
  *out = -1.0;
  return 0;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Box2 {
  prs_subspace* box = nullptr;
  Box2() {
    const char* names[] = {"a", "b"};
    const double lo[] = {-1, -1}, hi[] = {1, 1}, base[] = {0.1, 0.0};
    REQUIRE(prs_subspace_create(2, names, lo, hi, base, &box) == PRS_OK);
  }
  ~Box2() { prs_subspace_free(box); }
};

}  // namespace

TEST_CASE("C API: defaults and names") {
  prs_options o;
  prs_options_init(&o);
  CHECK(o.delta == 0.05);
  CHECK(o.max_samples == 200);
  CHECK(o.grid_density == 21);
  CHECK(std::string(prs_status_name(PRS_E_NO_DELTA)) == "no delta");
  CHECK(std::string(prs_verdict_name(PRS_VERDICT_PRS)) == "PRS");
  CHECK(std::string(prs_termination_name(PRS_STOP_SIGMA)) == "sigma");
}

TEST_CASE("C API: errors are reported with a message") {
  prs_network* net = nullptr;
  CHECK(prs_network_load("/nonexistent/file.net", &net) == PRS_E_IO);
  CHECK(net == nullptr);
  CHECK(std::string(prs_last_error()).find("nonexistent") != std::string::npos);
  CHECK(prs_network_parse("bus id=1 type=wobbly\n", &net) == PRS_E_PARSE);
  CHECK(prs_certify(nullptr, nullptr, nullptr, nullptr) == PRS_E_INVALID_ARGUMENT);
  prs_subspace* box = nullptr;
  CHECK(prs_subspace_parse("dim name=a lower=2 upper=1\n", &box) != PRS_OK);
  prs_network_free(nullptr);
  prs_run_free(nullptr);
}

TEST_CASE("C API: certify and search with a callback oracle") {
  Box2 b;
  prs_oracle* oracle = nullptr;
  REQUIRE(prs_oracle_from_callback(bowl, nullptr, &oracle) == PRS_OK);
  prs_options o;
  prs_options_init(&o);

  prs_run* run = nullptr;
  REQUIRE(prs_certify(oracle, b.box, &o, &run) == PRS_OK);
  prs_summary s;
  REQUIRE(prs_run_summary(run, &s) == PRS_OK);
  CHECK(s.verdict == PRS_VERDICT_NOT_CERTIFIED);
  CHECK(s.p_m >= 0.0);
  CHECK(s.has_search == 0);
  CHECK(prs_run_search_confidence(run, &o) == PRS_E_NO_DELTA);
  prs_run_free(run);

  REQUIRE(prs_search_subspace(oracle, b.box, &o, &run) == PRS_OK);
  REQUIRE(prs_run_summary(run, &s) == PRS_OK);
  CHECK(s.verdict == PRS_VERDICT_PRS);
  CHECK(s.has_search == 1);
  CHECK(s.alpha > 0.0);
  CHECK(s.alpha < 1.0);
  CHECK(s.anchor_lambda == doctest::Approx(-0.24));
  double lo[2], hi[2], arg[2];
  REQUIRE(prs_run_box(run, lo, hi, arg) == PRS_OK);
  CHECK(lo[0] <= 0.1);
  CHECK(hi[0] >= 0.1);
  CHECK(hi[0] - lo[0] < 2.0);
  CHECK(prs_run_dim(run) == 2);
  double mean = 0, var = 0;
  const double q[] = {0.1, 0.0};
  REQUIRE(prs_run_posterior(run, q, &mean, &var) == PRS_OK);
  CHECK(mean == doctest::Approx(-0.24).epsilon(1e-3));

  REQUIRE(prs_run_validate(run, oracle, 200, 3) == PRS_OK);
  REQUIRE(prs_run_summary(run, &s) == PRS_OK);
  CHECK(s.has_validation == 1);
  CHECK(s.validation_points == 200);
  CHECK(s.validation_unstable == 0);

  const auto dir = std::filesystem::temp_directory_path() / "prs_capi_test";
  std::filesystem::create_directories(dir);
  const auto cert = (dir / "certificate.txt").string();
  CHECK(prs_run_write_certificate(run, cert.c_str(), 0) == PRS_OK);
  CHECK(slurp(cert).find("verdict = PRS") != std::string::npos);
  CHECK(slurp(cert).find("search_alpha") != std::string::npos);
  CHECK(prs_run_write_history(run, (dir / "history.tsv").c_str(), 0) == PRS_OK);
  CHECK(prs_run_write_box_table(run, (dir / "box.tsv").c_str()) == PRS_OK);
  CHECK(prs_run_write_subspace(run, (dir / "box.spec").c_str()) == PRS_OK);
  CHECK(prs_run_write_gp(run, (dir / "model.gp").c_str()) == PRS_OK);
  CHECK(prs_run_write_surface(run, oracle, 11, (dir / "surface.csv").c_str()) == PRS_OK);
  prs_subspace* reread = nullptr;
  CHECK(prs_subspace_load((dir / "box.spec").c_str(), &reread) == PRS_OK);
  CHECK(prs_subspace_dim(reread) == 2);
  prs_subspace_free(reread);
  std::filesystem::remove_all(dir);

  prs_run_free(run);
  prs_oracle_free(oracle);
}

TEST_CASE("C API: a refusing callback follows the infeasible policy") {
  prs_subspace* box = nullptr;
  const char* names[] = {"x"};
  const double lo[] = {0}, hi[] = {1};
  REQUIRE(prs_subspace_create(1, names, lo, hi, nullptr, &box) == PRS_OK);
  int calls = 0;
  prs_oracle* oracle = nullptr;
  REQUIRE(prs_oracle_from_callback(refuse_far, &calls, &oracle) == PRS_OK);
  prs_options o;
  prs_options_init(&o);
  prs_run* run = nullptr;
  REQUIRE(prs_certify(oracle, box, &o, &run) == PRS_OK);
  prs_summary s;
  prs_run_summary(run, &s);
  CHECK(s.verdict == PRS_VERDICT_ABORTED_INFEASIBLE);
  CHECK(s.termination == PRS_STOP_ORACLE_FAILURE);
  CHECK(calls > 0);
  prs_run_free(run);

  o.infeasible_policy = PRS_INFEASIBLE_VIOLATE;
  REQUIRE(prs_certify(oracle, box, &o, &run) == PRS_OK);
  prs_run_summary(run, &s);
  CHECK(s.verdict == PRS_VERDICT_NOT_CERTIFIED);
  CHECK(std::isinf(s.p_m));
  prs_run_free(run);
  prs_oracle_free(oracle);
  prs_subspace_free(box);
}

TEST_CASE("C API: network evaluation and restriction") {
  prs_network* net = nullptr;
  REQUIRE(prs_network_load(PRS_DATA_DIR "/wscc9.net", &net) == PRS_OK);
  CHECK(prs_network_machine_count(net) == 3);
  const char* names[] = {"Pg2", "Pg3"};
  const double values[] = {2.922, 1.523};
  double pg[3], qg[3], vm[3], lambda = 0;
  REQUIRE(prs_evaluate(net, names, values, 2, pg, qg, vm, 3, &lambda) == PRS_OK);
  CHECK(std::abs(pg[0] - 1.515) < 1e-3);
  CHECK(lambda < 0.0);

  prs_subspace* box = nullptr;
  REQUIRE(prs_subspace_load(PRS_DATA_DIR "/subspaces/space9.spec", &box) == PRS_OK);
  prs_subspace* two = nullptr;
  REQUIRE(prs_subspace_restrict(box, "Pg2", "Qg2", &two) == PRS_OK);
  double lo[9], hi[9];
  REQUIRE(prs_subspace_bounds(two, lo, hi) == PRS_OK);
  int free_dims = 0;
  for (size_t i = 0; i < prs_subspace_dim(two); ++i) free_dims += lo[i] < hi[i];
  CHECK(free_dims == 2);
  CHECK(prs_subspace_restrict(box, "Pg2", "Nope", &two) == PRS_E_INVALID_ARGUMENT);

  prs_oracle* oracle = nullptr;
  REQUIRE(prs_oracle_from_network(net, two, &oracle) == PRS_OK);
  prs_oracle_free(oracle);
  prs_subspace_free(two);
  prs_subspace_free(box);
  prs_network_free(net);
}
