#include "CLI11.hpp"
#include "peer/harness.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using peer::MatrixXd;
using peer::VectorXd;

MatrixXd read_matrix_file(const std::string& path, int s) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read matrix file: " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream row(line);
    double v;
    while (row >> v) values.push_back(v);
    if (row.fail() && !row.eof())
      throw std::invalid_argument("non-numeric entry in " + path);
  }
  if (static_cast<int>(values.size()) != s * s)
    throw std::invalid_argument(path + ": expected " + std::to_string(s * s) +
                                " entries, found " +
                                std::to_string(values.size()));
  MatrixXd m(s, s);
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) m(i, j) = values[i * s + j];
  return m;
}

peer::PeerCoefficients method_from_spec(const std::string& spec) {
  if (spec.rfind("builtin:s", 0) == 0) {
    const std::string tail = spec.substr(9);
    if (tail.size() == 1 && tail[0] >= '1' && tail[0] <= '4')
      return peer::builtin_method(tail[0] - '0');
    throw std::invalid_argument("unknown builtin method '" + spec +
                                "' (use builtin:s1..builtin:s4)");
  }
  if (!std::filesystem::exists(spec))
    throw std::invalid_argument("no such coefficient file: " + spec);
  return peer::load_coefficients(spec);
}

struct ProblemRequest {
  std::string name;
  double epsilon = 1.0;
  int degree = 3;
  int cells = 32;
};

peer::SplitProblem make_problem(const ProblemRequest& req) {
  if (req.name == "wb") return peer::wb_boscarino_pareschi();
  if (req.name == "ap") return peer::ap_pareschi_russo(req.epsilon).full;
  if (req.name == "poly")
    return peer::polynomial_exactness_problem(req.degree, 0.3);
  if (req.name == "jinxin")
    return peer::jin_xin_demo(req.epsilon, req.cells).full;
  throw std::invalid_argument("unknown problem '" + req.name + "'");
}

void print_num(const char* key, double v) {
  std::printf("%s=%.17g\n", key, v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-step IMEX Peer methods: construction, validation, runs"};
  app.require_subcommand(1);

  // construct
  auto* construct = app.add_subcommand(
      "construct", "build an order-s coefficient set and write it to a file");
  int stages = 0;
  double gamma = 0.0;
  std::vector<double> nodes;
  std::string p_file, s2_file, construct_out;
  construct->add_option("--stages", stages, "stage count s")->required();
  construct->add_option("--gamma", gamma, "implicit diagonal gamma > 0")
      ->required();
  construct
      ->add_option("--nodes", nodes, "comma-separated nodes c1,...,cS")
      ->delimiter(',')
      ->required();
  construct->add_option("--p-file", p_file,
                        "s x s matrix P, one row per line (default e e_s^T)");
  construct->add_option("--s2-file", s2_file,
                        "strictly lower s x s matrix S2 (default 0)");
  construct->add_option("--out", construct_out, "output coefficient file")
      ->required();

  // validate
  auto* validate_cmd =
      app.add_subcommand("validate", "check a coefficient file");
  std::string validate_file;
  validate_cmd->add_option("file", validate_file, "coefficient file")
      ->required();

  // run
  auto* run_cmd =
      app.add_subcommand("run", "integrate a problem and write the trajectory");
  std::string run_method, run_out;
  ProblemRequest run_req;
  double run_dt = 0.0, run_tend = 0.0;
  run_cmd->add_option("--method", run_method, "builtin:sK or coefficient file")
      ->required();
  run_cmd->add_option("--problem", run_req.name, "wb|ap|poly|jinxin")
      ->required()
      ->check(CLI::IsMember({"wb", "ap", "poly", "jinxin"}));
  run_cmd->add_option("--epsilon", run_req.epsilon, "stiffness parameter")
      ->capture_default_str();
  run_cmd->add_option("--degree", run_req.degree, "poly problem degree")
      ->capture_default_str();
  run_cmd->add_option("--cells", run_req.cells, "jinxin grid cells")
      ->capture_default_str();
  run_cmd->add_option("--dt", run_dt, "step size")->required();
  run_cmd->add_option("--t-end", run_tend, "final time")->required();
  run_cmd->add_option("--out", run_out, "trajectory CSV path")->required();

  // convergence
  auto* conv_cmd = app.add_subcommand(
      "convergence", "step-halving sweep with least-squares order fit");
  std::string conv_method, conv_out;
  ProblemRequest conv_req;
  double conv_dt_max = 0.2, conv_tend = 5.0;
  int conv_levels = 5;
  conv_cmd->add_option("--method", conv_method, "builtin:sK or coefficient file")
      ->required();
  conv_cmd->add_option("--problem", conv_req.name, "wb|ap|poly|jinxin")
      ->required()
      ->check(CLI::IsMember({"wb", "ap", "poly", "jinxin"}));
  conv_cmd->add_option("--epsilon", conv_req.epsilon, "stiffness parameter")
      ->capture_default_str();
  conv_cmd->add_option("--degree", conv_req.degree, "poly problem degree")
      ->capture_default_str();
  conv_cmd->add_option("--cells", conv_req.cells, "jinxin grid cells")
      ->capture_default_str();
  conv_cmd->add_option("--dt-max", conv_dt_max, "largest step size")
      ->capture_default_str();
  conv_cmd->add_option("--levels", conv_levels, "number of halvings (>= 3)")
      ->capture_default_str();
  conv_cmd->add_option("--t-end", conv_tend, "final time")
      ->capture_default_str();
  conv_cmd->add_option("--out", conv_out, "convergence CSV path")->required();

  // wb-test
  auto* wb_cmd = app.add_subcommand(
      "wb-test", "equilibrium preservation report on the wb problem");
  std::string wb_method;
  int wb_steps = 100;
  double wb_dt = 1.0;
  std::vector<double> wb_perturb{1e-3, 1e-6};
  wb_cmd->add_option("--method", wb_method, "builtin:sK or coefficient file")
      ->required();
  wb_cmd->add_option("--steps", wb_steps, "equilibrium steps")
      ->capture_default_str();
  wb_cmd->add_option("--dt", wb_dt, "step size")->capture_default_str();
  wb_cmd->add_option("--perturb", wb_perturb, "stage perturbation sizes")
      ->delimiter(',')
      ->capture_default_str();

  // ap-test
  auto* ap_cmd = app.add_subcommand(
      "ap-test", "stiff-limit report on the ap problem");
  std::string ap_method;
  std::vector<double> ap_epsilons{1e-2, 1e-4, 1e-6, 1e-8};
  double ap_dt = 0.0125;
  ap_cmd->add_option("--method", ap_method, "builtin:sK or coefficient file")
      ->required();
  ap_cmd->add_option("--epsilons", ap_epsilons, "comma-separated epsilon list")
      ->delimiter(',')
      ->capture_default_str();
  ap_cmd->add_option("--dt", ap_dt, "step size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (construct->parsed()) {
      if (static_cast<int>(nodes.size()) != stages)
        throw std::invalid_argument("--nodes must list exactly " +
                                    std::to_string(stages) + " values");
      const VectorXd c = Eigen::Map<const VectorXd>(nodes.data(), stages);
      MatrixXd P = MatrixXd::Zero(stages, stages);
      P.col(stages - 1).setOnes();
      if (!p_file.empty()) P = read_matrix_file(p_file, stages);
      MatrixXd S2 = MatrixXd::Zero(stages, stages);
      if (!s2_file.empty()) S2 = read_matrix_file(s2_file, stages);
      const auto coeffs = peer::construct_order_s(c, gamma, P, S2);
      peer::save_coefficients(coeffs, construct_out);
      std::printf("wrote %s\n", construct_out.c_str());
      return 0;
    }

    if (validate_cmd->parsed()) {
      if (!std::filesystem::exists(validate_file))
        throw std::invalid_argument("no such coefficient file: " +
                                    validate_file);
      peer::PeerCoefficients coeffs;
      try {
        coeffs = peer::load_coefficients(validate_file);
      } catch (const peer::ValidationError& e) {
        std::cout << e.report().summary() << "\n";
        return 3;
      }
      const auto report = peer::validate(coeffs);
      std::cout << report.summary() << "\n";
      return report.passed ? 0 : 3;
    }

    if (run_cmd->parsed()) {
      const auto coeffs = method_from_spec(run_method);
      const auto problem = make_problem(run_req);
      const auto traj = peer::integrate(coeffs, problem, *problem.initial,
                                        run_tend, run_dt);
      peer::emit_csv(traj, run_out);
      std::printf("wrote %s\n", run_out.c_str());
      return 0;
    }

    if (conv_cmd->parsed()) {
      if (conv_levels < 3)
        throw std::invalid_argument("--levels must be >= 3");
      peer::RunSpec spec;
      spec.method = method_from_spec(conv_method);
      spec.method_label = conv_method;
      spec.problem = make_problem(conv_req);
      for (int i = 0; i < conv_levels; ++i)
        spec.dts.push_back(conv_dt_max / double(1 << i));
      spec.t_end = conv_tend;
      if (conv_req.name == "ap" || conv_req.name == "jinxin")
        spec.epsilon = conv_req.epsilon;
      const auto report = peer::convergence_study(spec);
      peer::emit_csv(report, conv_out);
      print_num("fitted_order", report.fitted_order);
      std::printf("wrote %s\n", conv_out.c_str());
      return 0;
    }

    if (wb_cmd->parsed()) {
      const auto coeffs = method_from_spec(wb_method);
      const auto report = peer::wb_test(coeffs, peer::wb_boscarino_pareschi(),
                                        wb_steps, wb_dt, wb_perturb);
      print_num("exact_drift", report.exact_drift);
      for (const auto& p : report.perturbations)
        std::printf("perturb epsilon=%.17g drift=%.17g ratio=%.17g\n",
                    p.epsilon, p.drift, p.ratio);
      print_num("final_distance", report.final_distance);
      std::printf("tail_nonincreasing=%s\n",
                  report.tail_nonincreasing ? "yes" : "no");
      return 0;
    }

    if (ap_cmd->parsed()) {
      const auto coeffs = method_from_spec(ap_method);
      const auto rp = peer::ap_pareschi_russo(1.0);
      const auto report = peer::ap_test(coeffs, rp, ap_epsilons, ap_dt);
      for (const auto& e : report.entries)
        std::printf(
            "epsilon=%.17g residual=%.17g projection_gap=%.17g\n", e.epsilon,
            e.residual, e.projection_gap);
      print_num("residual_slope", report.residual_slope);
      return 0;
    }
  } catch (const peer::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const peer::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
