#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "dualstat/dualstat.hpp"

namespace dualstat::cli {
namespace {

namespace fs = std::filesystem;
using io::json;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 1;
};

struct SimulateOptions {
  std::string gen = "dg1";
  int n = 100;
  double t = 0.1;
  double effect = 1.0;
  std::string cov = "identity";
  std::string y_source = "observed";
  double noise_scale = 1.0;
  std::vector<int> dims{8, 8, 8};
  int block = 2;
  std::vector<int> block_origin{3, 3, 3};
};

struct FitOptions {
  std::string data = ".";
  double C = 1.0;
  double tol = 1e-3;
};

struct PermtestOptions {
  std::string data = ".";
  std::string statistic = "T_CV";
  std::string estimator = "svm";
  int O = 1000;
  double alpha = 0.05;
  double bound_alpha = 0.05;
  int K = 10;
  double C = 1.0;
};

struct PowerOptions {
  std::string gen = "dg1";
  std::vector<int> ns{50, 100, 200};
  std::vector<double> ts{0.1};
  std::vector<double> effects{0.0, 1.0};
  std::vector<std::string> statistics{"T_CV", "T_Res"};
  std::vector<std::string> estimators{"svm"};
  std::string cov = "identity";
  int R = 100;
  int O = 199;
  double alpha = 0.05;
  double bound_alpha = 0.05;
  int K = 10;
  double C = 1.0;
};

struct VoxmapOptions {
  std::vector<std::string> volumes;
  std::string volume_dir;
  std::string labels;
  std::string mask;
  std::string calibration_mask;
  std::string statistic = "T_Res";
  std::string estimator = "svm";
  std::string direction = "less";
  int O = 1000;
  double alpha = 0.05;
  double bound_alpha = 0.05;
  int K = 10;
  double C = 1.0;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("dualstat", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DUALSTAT_LOG")) {
    logger->set_level(spdlog::level::from_str(env));
  }
  return logger;
}

std::uint64_t require_seed(const GlobalOptions& g, std::string_view command) {
  require(g.seed.has_value(), ErrorCode::InvalidArgument,
          "--seed is required for " + std::string(command));
  return *g.seed;
}

fs::path prepare_out(const GlobalOptions& g) {
  const fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

json seed_json(std::optional<std::uint64_t> seed) {
  return seed ? json(*seed) : json(nullptr);
}

json manifest(std::string_view command, std::optional<std::uint64_t> seed, const json& params,
              const std::vector<std::string>& files) {
  return json{{"tool", "dualstat"},
              {"version", kVersion},
              {"command", command},
              {"seed", seed_json(seed)},
              {"parameters", params},
              {"files", files}};
}

std::vector<std::string> csv_comments(std::string_view command, std::optional<std::uint64_t> seed,
                                      const json& params) {
  return {"dualstat " + std::string(kVersion) + " " + std::string(command) +
              " seed=" + seed_json(seed).dump(),
          "parameters " + params.dump()};
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const RowVector& v) { return to_json(Vector(v.transpose())); }

/// Linear interpolation between order statistics.
double quantile(std::vector<double> sorted, double q) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------- datasets

struct LoadedData {
  Vector y;
  DesignMatrix X;
  std::optional<DesignMatrix> X_true;
  std::optional<std::uint64_t> seed;
};

Vector single_column(const io::CsvTable& t, const fs::path& path, std::string_view name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  require(it != t.header.end(), ErrorCode::ParseError,
          path.string() + ": missing column '" + std::string(name) + "'");
  return t.values.col(it - t.header.begin());
}

DesignMatrix read_indicator(const fs::path& path) {
  const auto table = io::read_csv(path);
  require(table.values.cols() == 2, ErrorCode::ParseError,
          path.string() + ": expected 2 indicator columns, got " + std::to_string(table.values.cols()));
  try {
    return DesignMatrix::indicator(table.values);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

LoadedData load_dataset(const fs::path& dir) {
  const auto y_path = dir / "y.csv";
  const auto y = single_column(io::read_csv(y_path), y_path, "y");
  DesignMatrix X = read_indicator(dir / "X.csv");
  require(X.rows() == y.size(), ErrorCode::DimensionMismatch,
          "y.csv has " + std::to_string(y.size()) + " rows but X.csv has " + std::to_string(X.rows()));
  LoadedData data{y, std::move(X), std::nullopt, std::nullopt};
  if (fs::exists(dir / "X_true.csv")) data.X_true = read_indicator(dir / "X_true.csv");
  if (fs::exists(dir / "manifest.json")) {
    const json m = io::read_json(dir / "manifest.json");
    if (m.contains("seed") && m["seed"].is_number_unsigned()) data.seed = m["seed"].get<std::uint64_t>();
  }
  return data;
}

Matrix indicator_matrix(const DesignMatrix& X) { return X.entries(); }

Matrix as_column(const std::vector<bool>& flags) {
  Matrix m(static_cast<Eigen::Index>(flags.size()), 1);
  for (std::size_t i = 0; i < flags.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = flags[i] ? 1.0 : 0.0;
  return m;
}

datagen::GeneratorOptions generator_options(const std::string& cov, const std::string& y_source,
                                            double effect, double noise_scale) {
  datagen::GeneratorOptions g;
  g.covariance = datagen::parse_covariance_mode(cov);
  g.source = datagen::parse_observation_source(y_source);
  g.effect = effect;
  g.noise_scale = noise_scale;
  return g;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, spdlog::logger& log) {
  const auto seed = require_seed(g, "simulate");
  const auto dir = prepare_out(g);

  if (o.gen == "volume") {
    require(o.dims.size() == 3 && o.block_origin.size() == 3, ErrorCode::InvalidArgument,
            "--dims and --block-origin take three integers");
    const voxelwise::Dims dims{o.dims[0], o.dims[1], o.dims[2]};
    require(dims.nx >= 1 && dims.ny >= 1 && dims.nz >= 1, ErrorCode::DimsMismatch,
            "--dims must be positive, got " + voxelwise::to_string(dims));
    const json params{{"gen", o.gen},
                      {"n", o.n},
                      {"effect", o.effect},
                      {"dims", o.dims},
                      {"block", o.block},
                      {"block_origin", o.block_origin}};
    const auto vols = datagen::generate_effect_volumes(
        dims, o.n, {o.block_origin[0], o.block_origin[1], o.block_origin[2]}, o.block, o.effect, seed);
    fs::create_directories(dir / "volumes");
    std::vector<std::string> files;
    const json extra{{"seed", seed}, {"parameters", params}};
    for (std::size_t s = 0; s < vols.volumes.size(); ++s) {
      char name[32];
      std::snprintf(name, sizeof name, "subject_%04zu.f64", s);
      io::write_volume(dir / "volumes" / name, vols.volumes[s], extra);
      files.push_back(std::string("volumes/") + name);
    }
    io::write_csv(dir / "labels.csv", {"label"}, vols.labels, csv_comments("simulate", seed, params));
    io::write_mask(dir / "effect_mask.u8", dims, vols.effect_mask);
    files.insert(files.end(), {"labels.csv", "effect_mask.u8"});
    io::write_json(dir / "manifest.json", manifest("simulate", seed, params, files));
    log.info("wrote {} volumes of dims {} to {}", vols.volumes.size(), voxelwise::to_string(dims),
             dir.string());
    return 0;
  }

  const auto gopts = generator_options(o.cov, o.y_source, o.effect, o.noise_scale);
  json params{{"gen", o.gen},       {"n", o.n},          {"effect", o.effect},
              {"cov", o.cov},       {"noise_scale", o.noise_scale}};
  require(o.gen == "dg1" || o.gen == "dg2", ErrorCode::InvalidArgument,
          "unknown generator '" + o.gen + "'");
  if (o.gen == "dg2") {
    params["t"] = o.t;
    params["y_source"] = o.y_source;
  }
  const auto ds = o.gen == "dg1" ? datagen::generate_dg1(o.n, seed, gopts)
                                 : datagen::generate_dg2(o.n, o.t, seed, gopts);
  const auto comments = csv_comments("simulate", seed, params);
  io::write_csv(dir / "y.csv", {"y"}, ds.y, comments);
  io::write_csv(dir / "X.csv", {"x1", "x2"}, indicator_matrix(ds.X), comments);
  io::write_csv(dir / "X_true.csv", {"x1", "x2"}, indicator_matrix(ds.X_true), comments);
  io::write_csv(dir / "flip_mask.csv", {"flipped"}, as_column(ds.flip_mask), comments);
  io::write_json(dir / "manifest.json",
                 manifest("simulate", seed, params, {"y.csv", "X.csv", "X_true.csv", "flip_mask.csv"}));
  log.info("wrote {} rows to {}", o.n, dir.string());
  return 0;
}

// ---------------------------------------------------------------- fit

json classifier_errors(const std::vector<int>& predicted, const LoadedData& data) {
  json out{{"error", lrm::empirical_error(predicted, data.X)}};
  if (data.X_true) out["error_vs_truth"] = lrm::empirical_error(predicted, *data.X_true);
  return out;
}

int cmd_fit(const GlobalOptions& g, const FitOptions& o, spdlog::logger& log) {
  const auto data = load_dataset(o.data);
  const auto dir = prepare_out(g);
  const auto N = data.y.size();
  const Matrix Y = data.y;

  // GLM on the observations, then w by the dual map; labels by argmax of y w.
  const auto glm_fit = glm::fit_glm_ls(data.y, data.X);
  const auto scaled = glm::with_estimated_noise(glm_fit);
  Vector c(2);
  c << 1.0, -1.0;
  const double T = glm::t_statistic(scaled, glm::Contrast(c));
  const int df = static_cast<int>(N) - 2;
  const RowVector glm_w = duality::w_from_theta(glm_fit.theta);
  json glm_doc{{"theta", to_json(glm_fit.theta)},
               {"cov_theta", to_json(scaled.cov_theta)},
               {"rss", glm_fit.rss},
               {"T", T},
               {"df", df},
               {"p_value", glm::t_pvalue(T, df)},
               {"w", to_json(glm_w)}};
  glm_doc["classifier"] = classifier_errors(lrm::classify_rows(Y * glm_w), data);

  // LRM without intercept for the duality quantities, with one for labels.
  const auto lrm_fit = lrm::fit_lrm(Y, data.X);
  const RowVector lrm_w = lrm_fit.W.row(0);
  Matrix Y1(N, 2);
  Y1 << Y, Vector::Ones(N);
  const auto lrm_cls = lrm::fit_lrm(Y1, data.X);
  json lrm_doc{{"W", to_json(lrm_fit.W)},
               {"theta", to_json(duality::theta_from_w(lrm_w))},
               {"normalization_scalar", duality::normalization_scalar(data.y, data.X)},
               {"inverse_w_norm", 1.0 / lrm_w.squaredNorm()}};
  lrm_doc["classifier"] = classifier_errors(lrm::classify_rows(Y1 * lrm_cls.W), data);
  lrm_doc["classifier"]["W_with_intercept"] = to_json(lrm_cls.W);

  svm::SvmOptions sopts;
  sopts.C = o.C;
  sopts.tol = o.tol;
  const auto model = svm::train_linear_svm(Y, svm::labels_from_indicator(data.X), sopts);
  if (!model.converged) log.warn("SVM stopped after {} iterations without meeting tol", model.iterations);
  std::vector<int> svm_pred(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) {
    svm_pred[static_cast<std::size_t>(i)] = svm::decision(model, Y.row(i).transpose()) >= 0.0 ? 0 : 1;
  }
  const RowVector svm_row = svm::svm_row_parameters(model);
  json svm_doc{{"w", to_json(model.w)},
               {"w0", model.w0},
               {"C", model.C},
               {"support_vectors", model.support_indices.size()},
               {"converged", model.converged},
               {"theta", to_json(duality::theta_from_w(svm_row))}};
  svm_doc["classifier"] = classifier_errors(svm_pred, data);

  const json params{{"data", o.data}, {"C", o.C}, {"tol", o.tol}};
  json report{{"tool", "dualstat"}, {"version", kVersion}, {"command", "fit"},
              {"seed", seed_json(data.seed)}, {"parameters", params}, {"N", N},
              {"glm", glm_doc}, {"lrm", lrm_doc}, {"svm", svm_doc}};
  io::write_json(dir / "fit.json", report);
  log.info("fit report written to {}", (dir / "fit.json").string());
  return 0;
}

// ---------------------------------------------------------------- permtest

struct StatisticSetup {
  inference::Estimator estimator;
  inference::StatisticFn statistic;
};

StatisticSetup make_statistic(const std::string& statistic, const std::string& estimator, int K,
                              double bound_alpha, double C, std::uint64_t fold_seed) {
  svm::SvmOptions sopts;
  sopts.C = C;
  StatisticSetup s{inference::make_estimator(inference::parse_estimator(estimator), sopts), {}};
  switch (voxelwise::parse_statistic(statistic)) {
    case voxelwise::StatisticKind::T: s.statistic = inference::negated_abs_t_statistic(); break;
    case voxelwise::StatisticKind::T_CV: s.statistic = inference::cv_statistic(K, fold_seed); break;
    case voxelwise::StatisticKind::T_Res: s.statistic = inference::resubstitution_statistic(bound_alpha); break;
  }
  return s;
}

inline constexpr std::uint64_t kFoldStream = 0x666f6c64;
inline constexpr std::uint64_t kPermStream = 0x7065726d;

int cmd_permtest(const GlobalOptions& g, const PermtestOptions& o, spdlog::logger& log) {
  const auto seed = require_seed(g, "permtest");
  require(o.O >= 1, ErrorCode::InvalidArgument, "--O must be >= 1");
  const auto data = load_dataset(o.data);
  const auto dir = prepare_out(g);
  const Matrix Y = data.y;
  const Vector x = svm::labels_from_indicator(data.X).values();

  const auto setup = make_statistic(o.statistic, o.estimator, o.K, o.bound_alpha, o.C,
                                    stream_seed(seed, kFoldStream));
  const auto outcome = inference::permutation_test(Y, x, setup.estimator, setup.statistic, o.O,
                                                   stream_seed(seed, kPermStream), g.threads);
  const auto& nulls = outcome.null_values;
  double sum = 0.0;
  for (double v : nulls) sum += v;
  const json summary{{"min", *std::min_element(nulls.begin(), nulls.end())},
                     {"max", *std::max_element(nulls.begin(), nulls.end())},
                     {"mean", sum / static_cast<double>(nulls.size())},
                     {"q05", quantile(nulls, 0.05)},
                     {"q25", quantile(nulls, 0.25)},
                     {"q50", quantile(nulls, 0.50)},
                     {"q75", quantile(nulls, 0.75)},
                     {"q95", quantile(nulls, 0.95)}};
  const json params{{"data", o.data},   {"statistic", o.statistic}, {"estimator", o.estimator},
                    {"O", o.O},         {"alpha", o.alpha},         {"bound_alpha", o.bound_alpha},
                    {"K", o.K},         {"C", o.C}};
  const json report{{"tool", "dualstat"},
                    {"version", kVersion},
                    {"command", "permtest"},
                    {"seed", seed},
                    {"parameters", params},
                    {"statistic", outcome.statistic},
                    {"O", outcome.permutations},
                    {"count_below", outcome.count_below},
                    {"p_value", outcome.p_value},
                    {"rejected", outcome.p_value <= o.alpha},
                    {"null_summary", summary}};
  io::write_json(dir / "permtest.json", report);

  Matrix null_table(static_cast<Eigen::Index>(nulls.size()), 2);
  for (std::size_t p = 0; p < nulls.size(); ++p) {
    null_table(static_cast<Eigen::Index>(p), 0) = static_cast<double>(p + 1);
    null_table(static_cast<Eigen::Index>(p), 1) = nulls[p];
  }
  io::write_csv(dir / "permtest_null.csv", {"permutation", "statistic"}, null_table,
                csv_comments("permtest", seed, params));
  log.info("p = {} with {} permutations", outcome.p_value, outcome.permutations);
  return 0;
}

// ---------------------------------------------------------------- power

int cmd_power(const GlobalOptions& g, const PowerOptions& o, spdlog::logger& log) {
  const auto seed = require_seed(g, "power");
  const bool dg2 = o.gen == "dg2";
  require(dg2 || o.gen == "dg1", ErrorCode::InvalidArgument, "unknown generator '" + o.gen + "'");
  const std::vector<double> ts = dg2 ? o.ts : std::vector<double>{0.0};
  require(!o.ns.empty() && !ts.empty() && !o.effects.empty() && !o.statistics.empty() &&
              !o.estimators.empty(),
          ErrorCode::InvalidArgument, "empty sweep grid");
  require(o.R >= 1, ErrorCode::InvalidArgument, "--R must be >= 1");
  require(o.O >= 1, ErrorCode::InvalidArgument, "--O must be >= 1");
  for (const auto& s : o.statistics) voxelwise::parse_statistic(s);
  for (const auto& e : o.estimators) inference::parse_estimator(e);
  const auto dir = prepare_out(g);

  const json params{{"gen", o.gen},        {"ns", o.ns},
                    {"ts", ts},            {"effects", o.effects},
                    {"statistics", o.statistics}, {"estimators", o.estimators},
                    {"cov", o.cov},        {"R", o.R},
                    {"O", o.O},            {"alpha", o.alpha},
                    {"bound_alpha", o.bound_alpha}, {"K", o.K},
                    {"C", o.C}};

  const std::size_t rows = o.ns.size() * ts.size() * o.effects.size() * o.statistics.size() *
                           o.estimators.size();
  Matrix table(static_cast<Eigen::Index>(rows), 9);
  Matrix runtime(static_cast<Eigen::Index>(rows), 1);
  std::vector<std::string> stat_names, est_names;
  Eigen::Index row = 0;
  std::uint64_t point = 0;
  for (int N : o.ns) {
    for (double t : ts) {
      for (double effect : o.effects) {
        // Every statistic and estimator sees the same R datasets at this point.
        const std::uint64_t point_seed = stream_seed(seed, point++);
        const auto gopts = generator_options(o.cov, "observed", effect, 1.0);
        for (std::size_t si = 0; si < o.statistics.size(); ++si) {
          for (std::size_t ei = 0; ei < o.estimators.size(); ++ei) {
            const auto start = std::chrono::steady_clock::now();
            std::vector<double> pvals(static_cast<std::size_t>(o.R));
            parallel_for(pvals.size(), g.threads, [&](std::size_t r) {
              const std::uint64_t ds_seed = stream_seed(point_seed, r);
              const auto ds = dg2 ? datagen::generate_dg2(N, t, ds_seed, gopts)
                                  : datagen::generate_dg1(N, ds_seed, gopts);
              const Matrix Y = ds.y;
              const Vector x = svm::labels_from_indicator(ds.X).values();
              const auto setup = make_statistic(o.statistics[si], o.estimators[ei], o.K,
                                                o.bound_alpha, o.C, stream_seed(ds_seed, kFoldStream));
              pvals[r] = inference::permutation_test(Y, x, setup.estimator, setup.statistic, o.O,
                                                     stream_seed(ds_seed, kPermStream))
                             .p_value;
            });
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            double rejected = 0.0, p_sum = 0.0;
            for (double p : pvals) {
              rejected += p <= o.alpha ? 1.0 : 0.0;
              p_sum += p;
            }
            table.row(row) << N, t, effect, static_cast<double>(si), static_cast<double>(ei), o.R, o.O,
                rejected / o.R, p_sum / o.R;
            runtime(row, 0) = seconds;
            stat_names.push_back(o.statistics[si]);
            est_names.push_back(o.estimators[ei]);
            log.info("N={} t={} effect={} {} {}: rejection {}", N, t, effect, o.statistics[si],
                     o.estimators[ei], rejected / o.R);
            ++row;
          }
        }
      }
    }
  }

  // Statistic and estimator names are text, so this table is written by hand.
  const auto comments = csv_comments("power", seed, params);
  auto write_rows = [&](const fs::path& path, const std::string& header, auto&& tail) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    for (const auto& c : comments) out << "# " << c << '\n';
    out << header << '\n';
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      out << io::format_double(table(i, 0)) << ',' << io::format_double(table(i, 1)) << ','
          << io::format_double(table(i, 2)) << ',' << stat_names[static_cast<std::size_t>(i)] << ','
          << est_names[static_cast<std::size_t>(i)] << tail(i) << '\n';
    }
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
  };
  write_rows(dir / "power.csv", "N,t,effect,statistic,estimator,R,O,rejection_rate,mean_p",
             [&](Eigen::Index i) {
               return "," + io::format_double(table(i, 5)) + "," + io::format_double(table(i, 6)) + "," +
                      io::format_double(table(i, 7)) + "," + io::format_double(table(i, 8));
             });
  write_rows(dir / "power_runtime.csv", "N,t,effect,statistic,estimator,runtime_s",
             [&](Eigen::Index i) { return "," + io::format_double(runtime(i, 0)); });
  io::write_json(dir / "manifest.json",
                 manifest("power", seed, params, {"power.csv", "power_runtime.csv"}));
  return 0;
}

// ---------------------------------------------------------------- voxmap

std::vector<fs::path> volume_paths(const VoxmapOptions& o) {
  std::vector<fs::path> paths(o.volumes.begin(), o.volumes.end());
  if (!o.volume_dir.empty()) {
    require(fs::is_directory(o.volume_dir), ErrorCode::IoError, "not a directory: " + o.volume_dir);
    for (const auto& entry : fs::directory_iterator(o.volume_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".f64") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
  }
  require(!paths.empty(), ErrorCode::InvalidArgument, "no volumes given (use --volumes or --volume-dir)");
  return paths;
}

std::vector<std::uint8_t> load_mask(const std::string& path, const voxelwise::Dims& dims) {
  auto [mdims, mask] = io::read_mask(path);
  require(mdims == dims, ErrorCode::DimsMismatch,
          path + " has dims " + voxelwise::to_string(mdims) + ", volumes have " + voxelwise::to_string(dims));
  return mask;
}

int cmd_voxmap(const GlobalOptions& g, const VoxmapOptions& o, spdlog::logger& log) {
  const auto seed = require_seed(g, "voxmap");
  require(!o.labels.empty(), ErrorCode::InvalidArgument, "--labels is required");
  const auto paths = volume_paths(o);
  std::vector<voxelwise::Volume> volumes;
  volumes.reserve(paths.size());
  for (const auto& p : paths) volumes.push_back(io::read_volume(p));
  const auto label_table = io::read_csv(o.labels);
  const svm::BinaryLabels labels(single_column(label_table, o.labels, "label"));
  const auto dims = volumes.front().dims();
  const auto dir = prepare_out(g);

  voxelwise::VoxelTestConfig cfg;
  cfg.statistic = voxelwise::parse_statistic(o.statistic);
  cfg.estimator = inference::parse_estimator(o.estimator);
  cfg.permutations = o.O;
  cfg.alpha = o.alpha;
  cfg.folds = o.K;
  cfg.bound_alpha = o.bound_alpha;
  cfg.svm.C = o.C;
  cfg.threads = g.threads;
  if (!o.mask.empty()) cfg.mask = load_mask(o.mask, dims);
  const auto direction = voxelwise::parse_direction(o.direction);

  json params{{"volumes", paths.size()}, {"labels", o.labels},   {"mask", o.mask},
              {"statistic", o.statistic}, {"estimator", o.estimator}, {"O", o.O},
              {"alpha", o.alpha},        {"bound_alpha", o.bound_alpha}, {"K", o.K},
              {"C", o.C},                {"calibration_mask", o.calibration_mask},
              {"direction", o.direction}};

  voxelwise::StatMap map;
  std::optional<double> threshold;
  std::size_t calibration_voxels = 0;
  if (o.calibration_mask.empty()) {
    map = voxelwise::run_voxel_tests(volumes, labels, cfg, seed);
  } else {
    require(cfg.statistic != voxelwise::StatisticKind::T, ErrorCode::InvalidArgument,
            "threshold calibration needs a residual statistic (T_CV or T_Res)");
    require(o.O >= 1, ErrorCode::InvalidArgument, "threshold calibration needs --O >= 1");
    auto region = load_mask(o.calibration_mask, dims);
    if (cfg.mask) {
      for (std::size_t v = 0; v < region.size(); ++v) region[v] &= (*cfg.mask)[v];
    }
    voxelwise::VoxelTestConfig cal = cfg;
    cal.mask = region;
    const auto cal_map = voxelwise::run_voxel_tests(volumes, labels, cal, seed);
    std::vector<double> stats, pvals;
    for (std::size_t v = 0; v < region.size(); ++v) {
      if (!region[v]) continue;
      stats.push_back(cal_map.stat[v]);
      pvals.push_back((*cal_map.p)[v]);
    }
    calibration_voxels = stats.size();
    threshold = voxelwise::calibrate_threshold(stats, pvals, o.alpha);

    voxelwise::VoxelTestConfig rest = cfg;
    rest.permutations = 0;
    map = voxelwise::threshold_map(voxelwise::run_voxel_tests(volumes, labels, rest, seed), *threshold,
                                   direction);
    map.p = cal_map.p;
  }

  std::size_t in_mask = 0;
  for (double s : map.stat) in_mask += std::isnan(s) ? 0 : 1;
  const json extra{{"seed", seed}, {"parameters", params}};
  io::write_statmap(dir / "statmap.f64", map, extra);
  json summary{{"tool", "dualstat"},
               {"version", kVersion},
               {"command", "voxmap"},
               {"seed", seed},
               {"parameters", params},
               {"dims", {dims.nx, dims.ny, dims.nz}},
               {"in_mask_voxels", in_mask},
               {"detected_count", map.detected_count()},
               {"T_th", threshold ? json(*threshold) : json(nullptr)}};
  if (threshold) summary["calibration_voxels"] = calibration_voxels;
  io::write_json(dir / "summary.json", summary);
  log.info("{} of {} voxels detected", map.detected_count(), in_mask);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"Dual regression models, SVM and permutation inference", "dualstat"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "RNG seed (required for stochastic commands)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (never changes results)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate->add_option("--gen", sim.gen, "dg1, dg2 or volume")->capture_default_str();
  simulate->add_option("--n", sim.n, "rows (subjects for --gen volume)")->capture_default_str();
  simulate->add_option("--t", sim.t, "label flip probability (dg2)")->capture_default_str();
  simulate->add_option("--effect", sim.effect, "class mean shift")->capture_default_str();
  simulate->add_option("--cov", sim.cov, "identity or random_spd")->capture_default_str();
  simulate->add_option("--y-source", sim.y_source, "observed or truth (dg2)")->capture_default_str();
  simulate->add_option("--noise-scale", sim.noise_scale, "noise multiplier")->capture_default_str();
  simulate->add_option("--dims", sim.dims, "volume dims nx,ny,nz")->delimiter(',')->expected(3);
  simulate->add_option("--block", sim.block, "edge of the effect cube")->capture_default_str();
  simulate->add_option("--block-origin", sim.block_origin, "effect cube corner x,y,z")
      ->delimiter(',')
      ->expected(3);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit GLM, LRM and SVM to a dataset");
  fit_cmd->add_option("--data", fit.data, "dataset directory")->capture_default_str();
  fit_cmd->add_option("--C", fit.C, "SVM cost")->capture_default_str();
  fit_cmd->add_option("--tol", fit.tol, "SVM KKT tolerance")->capture_default_str();

  PermtestOptions perm;
  auto* perm_cmd = app.add_subcommand("permtest", "permutation test on a dataset");
  perm_cmd->add_option("--data", perm.data, "dataset directory")->capture_default_str();
  perm_cmd->add_option("--statistic", perm.statistic, "T, T_CV or T_Res")->capture_default_str();
  perm_cmd->add_option("--estimator", perm.estimator, "glm, lrm or svm")->capture_default_str();
  perm_cmd->add_option("--O", perm.O, "permutations")->capture_default_str();
  perm_cmd->add_option("--alpha", perm.alpha, "decision level")->capture_default_str();
  perm_cmd->add_option("--bound-alpha", perm.bound_alpha, "confidence of the risk bound")
      ->capture_default_str();
  perm_cmd->add_option("--K", perm.K, "cross-validation folds")->capture_default_str();
  perm_cmd->add_option("--C", perm.C, "SVM cost")->capture_default_str();

  PowerOptions pow;
  auto* power = app.add_subcommand("power", "Monte Carlo rejection rates over a parameter grid");
  power->add_option("--gen", pow.gen, "dg1 or dg2")->capture_default_str();
  power->add_option("--ns", pow.ns, "sample sizes")->delimiter(',');
  power->add_option("--ts", pow.ts, "flip probabilities (dg2)")->delimiter(',');
  power->add_option("--effects", pow.effects, "mean shifts; 0 is the null")->delimiter(',');
  power->add_option("--statistics", pow.statistics, "T, T_CV, T_Res")->delimiter(',');
  power->add_option("--estimators", pow.estimators, "glm, lrm, svm")->delimiter(',');
  power->add_option("--cov", pow.cov, "identity or random_spd")->capture_default_str();
  power->add_option("--R", pow.R, "repeats per cell")->capture_default_str();
  power->add_option("--O", pow.O, "permutations per test")->capture_default_str();
  power->add_option("--alpha", pow.alpha, "decision level")->capture_default_str();
  power->add_option("--bound-alpha", pow.bound_alpha, "confidence of the risk bound")
      ->capture_default_str();
  power->add_option("--K", pow.K, "cross-validation folds")->capture_default_str();
  power->add_option("--C", pow.C, "SVM cost")->capture_default_str();

  VoxmapOptions vox;
  auto* voxmap = app.add_subcommand("voxmap", "voxelwise statistic map");
  voxmap->add_option("--volumes", vox.volumes, "subject volume files (.f64)");
  voxmap->add_option("--volume-dir", vox.volume_dir, "directory of .f64 volumes, sorted by name");
  voxmap->add_option("--labels", vox.labels, "CSV with a 'label' column of +1/-1");
  voxmap->add_option("--mask", vox.mask, "u8 analysis mask");
  voxmap->add_option("--calibration-mask", vox.calibration_mask, "u8 region used to calibrate T_th");
  voxmap->add_option("--statistic", vox.statistic, "T, T_CV or T_Res")->capture_default_str();
  voxmap->add_option("--estimator", vox.estimator, "glm, lrm or svm")->capture_default_str();
  voxmap->add_option("--direction", vox.direction, "less or greater")->capture_default_str();
  voxmap->add_option("--O", vox.O, "permutations per voxel (0: none)")->capture_default_str();
  voxmap->add_option("--alpha", vox.alpha, "per-voxel decision level")->capture_default_str();
  voxmap->add_option("--bound-alpha", vox.bound_alpha, "confidence of the risk bound")
      ->capture_default_str();
  voxmap->add_option("--K", vox.K, "cross-validation folds")->capture_default_str();
  voxmap->add_option("--C", vox.C, "SVM cost")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: InvalidArgument: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*simulate) return cmd_simulate(g, sim, *log);
    if (*fit_cmd) return cmd_fit(g, fit, *log);
    if (*perm_cmd) return cmd_permtest(g, perm, *log);
    if (*power) return cmd_power(g, pow, *log);
    if (*voxmap) return cmd_voxmap(g, vox, *log);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace dualstat::cli
