// sfda: fit, predict, cross-validate, simulate, benchmark, featurize, diagnose.
//
// Exit codes: 0 success, 2 validation error, 3 convergence error, 4 I/O error.
// Failures print one line to stderr:
//   error=<tag> code=<exit code> message="<text>"

#include "sfda/bench.hpp"
#include "sfda/diagnostics.hpp"
#include "sfda/features.hpp"
#include "sfda/io.hpp"
#include "sfda/model_selection.hpp"
#include "sfda/parallel.hpp"
#include "sfda/sfda_core.hpp"
#include "sfda/simgen.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace sfda;
using nlohmann::json;

/// Files written by the current command; removed again if it fails.
std::vector<std::string> g_outputs;

void emit(const std::string& path, const std::string& content) {
    io::write_file(path, content);
    g_outputs.push_back(path);
}

void remove_outputs() {
    for (const auto& p : g_outputs) {
        std::error_code ec;
        std::filesystem::remove(p, ec);
        std::filesystem::remove(p + ".partial", ec);
    }
}

std::string quote(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return '"' + out + '"';
}

int report(const std::string& tag, int code, const std::string& msg) {
    remove_outputs();
    std::cerr << "error=" << tag << " code=" << code << " message=" << quote(msg) << '\n';
    return code;
}

struct SolverOpts {
    int max_outer = SolverConfig{}.max_outer_iters;
    int max_inner = SolverConfig{}.max_inner_iters;
    double tol_outer = SolverConfig{}.tol_outer;
    double tol_inner = SolverConfig{}.tol_inner;

    void add(CLI::App* app) {
        app->add_option("--max-outer", max_outer, "Outer iteration cap")->capture_default_str();
        app->add_option("--max-inner", max_inner, "Inner iteration cap")->capture_default_str();
        app->add_option("--tol-outer", tol_outer, "Relative objective change tolerance")->capture_default_str();
        app->add_option("--tol-inner", tol_inner, "Inner residual tolerance")->capture_default_str();
    }
    SolverConfig config() const {
        SolverConfig c;
        c.max_outer_iters = max_outer;
        c.max_inner_iters = max_inner;
        c.tol_outer = tol_outer;
        c.tol_inner = tol_inner;
        return c;
    }
};

struct GridOpts {
    TuningGrid grid;
    void add(CLI::App* app) {
        app->add_option("--taus", grid.taus, "Grid of tau values")->delimiter(',')->capture_default_str();
        app->add_option("--lambdas", grid.lambdas, "Grid of lambda values")->delimiter(',')->capture_default_str();
        app->add_option("--kappa-factors", grid.kappa_factors, "Grid of kappa factors (times ||B a||_1)")
            ->delimiter(',')
            ->capture_default_str();
        app->add_option("--folds", grid.folds, "Cross-validation folds")->capture_default_str();
    }
};

std::string cv_summary(const CvResult& r) {
    const auto& b = r.table[r.best_row];
    std::ostringstream os;
    os << "tau=" << b.tau << " lambda=" << b.lambda << " kappa_factor=" << b.kappa_factor
       << " cv_error=" << b.mean_error;
    return os.str();
}

std::string table_csv(const std::vector<CvRow>& t) {
    std::ostringstream os;
    write_cv_table(os, t);
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse Fisher discriminant analysis with thresholded linear constraints"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, std::string("Worker threads (0: $") + kThreadsEnv + " or all cores)");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model on a labeled CSV");
    std::string fit_train, fit_model, fit_table;
    FitParams fp;
    std::string fit_variant = "thresholded", fit_kscale = "relative_l1";
    bool fit_cv = false;
    std::uint64_t fit_seed = 0;
    SolverOpts fit_solver;
    GridOpts fit_grid;
    fit_cmd->add_option("--train", fit_train, "Training CSV (label, features...)")->required();
    fit_cmd->add_option("--model", fit_model, "Output model file (JSON)")->required();
    fit_cmd->add_option("--tau", fp.penalty.tau, "Ridge weight tau")->capture_default_str();
    fit_cmd->add_option("--lambda", fp.penalty.lambda, "Squared-l1 share lambda in [0,1]")->capture_default_str();
    fit_cmd->add_option("--kappa", fp.kappa, "Threshold kappa")->capture_default_str();
    fit_cmd->add_option("--kappa-scale", fit_kscale, "relative_l1 or absolute")->capture_default_str();
    fit_cmd->add_option("--variant", fit_variant, "thresholded or unthresholded")->capture_default_str();
    auto* fit_cv_flag = fit_cmd->add_flag("--cv", fit_cv, "Choose tau, lambda, kappa by cross-validation");
    fit_cmd->add_option("--seed", fit_seed, "Fold seed (required with --cv)")->needs(fit_cv_flag);
    fit_cmd->add_option("--cv-table", fit_table, "Write the CV table here (with --cv)")->needs(fit_cv_flag);
    fit_solver.add(fit_cmd);
    fit_grid.add(fit_cmd);

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "Predict class labels");
    std::string pred_model, pred_input, pred_output;
    bool pred_unlabeled = false;
    pred_cmd->add_option("--model", pred_model, "Model file")->required();
    pred_cmd->add_option("--input", pred_input, "CSV of observations")->required();
    pred_cmd->add_option("--output", pred_output, "Output CSV (row, predicted)")->required();
    pred_cmd->add_flag("--unlabeled", pred_unlabeled, "Input has no label column");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate over the tuning grid");
    std::string cv_train, cv_table, cv_params, cv_variant = "thresholded";
    std::uint64_t cv_seed = 0;
    SolverOpts cv_solver;
    GridOpts cv_grid;
    cv_cmd->add_option("--train", cv_train, "Training CSV")->required();
    cv_cmd->add_option("--table", cv_table, "Output CV table CSV")->required();
    cv_cmd->add_option("--params", cv_params, "Write the chosen parameters as JSON");
    cv_cmd->add_option("--variant", cv_variant, "thresholded or unthresholded")->capture_default_str();
    cv_cmd->add_option("--seed", cv_seed, "Fold seed")->required();
    cv_solver.add(cv_cmd);
    cv_grid.add(cv_cmd);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a benchmark dataset");
    std::string sim_model = "sim1", sim_dir = ".";
    SimScenario scn;
    std::uint64_t sim_seed = 0;
    std::optional<std::uint64_t> sim_mean_seed;
    sim_cmd->add_option("--model", sim_model, "sim1, sim2 or sim3")->capture_default_str();
    sim_cmd->add_option("--sigma2", scn.sigma2, "Noise scale sigma^2")->capture_default_str();
    sim_cmd->add_option("--seed", sim_seed, "Seed for labels, noise and split")->required();
    sim_cmd->add_option("--mean-seed", sim_mean_seed, "Seed for class means (default: --seed)");
    sim_cmd->add_option("--p", scn.p, "Dimension")->capture_default_str();
    sim_cmd->add_option("--n-total", scn.n_total, "Observations generated")->capture_default_str();
    sim_cmd->add_option("--n-train", scn.n_train, "Training observations")->capture_default_str();
    sim_cmd->add_option("--out-dir", sim_dir, "Directory for train.csv, test.csv, truth.json")->capture_default_str();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Replicated simulation benchmark");
    std::vector<std::string> bench_models{"sim1"};
    std::vector<double> bench_sigma2{1.0};
    bool bench_all = false;
    BenchConfig bc;
    std::string bench_md, bench_csv;
    SolverOpts bench_solver;
    GridOpts bench_grid;
    bench_cmd->add_option("--model", bench_models, "Models (paired with --sigma2)")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--sigma2", bench_sigma2, "Noise scales, one per model")->delimiter(',')->capture_default_str();
    bench_cmd->add_flag("--all-settings", bench_all, "Run sim1 (1,4), sim2 (1), sim3 (1,3)");
    bench_cmd->add_option("--reps", bc.reps, "Replicates per row")->capture_default_str();
    bench_cmd->add_option("--seed", bc.seed, "Base seed")->required();
    bench_cmd->add_option("--p", bc.scenario.p, "Dimension")->capture_default_str();
    bench_cmd->add_option("--n-total", bc.scenario.n_total, "Observations per replicate")->capture_default_str();
    bench_cmd->add_option("--n-train", bc.scenario.n_train, "Training observations")->capture_default_str();
    bench_cmd->add_option("--ridge", bc.ridge, "Ridge-LDA ridge (times mean variance)")->capture_default_str();
    bench_cmd->add_option("--markdown", bench_md, "Write the Markdown table here");
    bench_cmd->add_option("--csv", bench_csv, "Write the CSV table here");
    bench_solver.add(bench_cmd);
    bench_grid.add(bench_cmd);

    // featurize
    auto* feat_cmd = app.add_subcommand("featurize", "FFT + wavelet features from multichannel records");
    std::string feat_in, feat_out, feat_family = "haar";
    int feat_channels = 1;
    FeatureConfig fc;
    feat_cmd->add_option("--input", feat_in, "Record CSV: label, then channels*T values channel-major")
        ->required();
    feat_cmd->add_option("--output", feat_out, "Feature CSV (label, features)")->required();
    feat_cmd->add_option("--channels", feat_channels, "Channels per record")->required();
    feat_cmd->add_option("--coefficients", fc.coefficients, "Coefficients per channel")->capture_default_str();
    feat_cmd->add_option("--wavelet", feat_family, "haar or d4")->capture_default_str();

    // diagnose
    auto* diag_cmd = app.add_subcommand("diagnose", "Theory identities and trend experiments");
    std::string diag_exp = "consistency", diag_out;
    TrendConfig tc;
    int diag_p = 100;
    diag_cmd->add_option("--experiment", diag_exp, "consistency, optimality or identities")->capture_default_str();
    diag_cmd->add_option("--seed", tc.seed, "Seed")->required();
    diag_cmd->add_option("--seeds", tc.seeds, "Datasets per n")->capture_default_str();
    diag_cmd->add_option("--p", diag_p, "Dimension")->capture_default_str();
    diag_cmd->add_option("--n-list", tc.n_list, "Sample sizes")->delimiter(',')->capture_default_str();
    diag_cmd->add_option("--tau-scale", tc.tau_scale, "tau = scale * s_n")->capture_default_str();
    diag_cmd->add_option("--lambda", tc.lambda, "lambda")->capture_default_str();
    diag_cmd->add_option("--kappa-scale", tc.kappa_scale, "kappa = scale * lambda_1 * Lambda_p * s_n")
        ->capture_default_str();
    diag_cmd->add_option("--output", diag_out, "Write the report CSV here (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error=usage code=2 message=" << quote(e.what()) << '\n';
        return 2;
    }

    const int nthreads = resolve_threads(threads);
    try {
        if (*fit_cmd) {
            const auto data = io::read_dataset(fit_train);
            fp.variant = parse_variant(fit_variant);
            fp.kappa_scale = parse_kappa_scale(fit_kscale);
            fp.solver = fit_solver.config();
            if (fit_cv) {
                if (fit_cmd->count("--seed") == 0) throw ValidationError("usage", "--cv requires --seed");
                fit_grid.grid.seed = fit_seed;
                const auto r = cross_validate(data, fit_grid.grid, fp.variant, fp.solver, nthreads);
                fp = r.best;
                if (!fit_table.empty()) emit(fit_table, table_csv(r.table));
                std::cerr << "selected " << cv_summary(r) << '\n';
            }
            emit(fit_model, io::model_json(fit(data, fp)).dump() + "\n");
        } else if (*pred_cmd) {
            const auto model = io::load_model(pred_model);
            Matrix x;
            std::vector<int> truth;
            if (pred_unlabeled) {
                x = io::read_unlabeled(pred_input);
            } else {
                auto [labels, obs] = io::split_labeled(io::read_numeric_csv(pred_input), pred_input);
                truth = std::move(labels);
                x = std::move(obs);
            }
            if (x.cols() != model.dim())
                throw ValidationError("shape", "input has " + std::to_string(x.cols()) + " features, model expects " +
                                                   std::to_string(model.dim()));
            std::vector<int> pred(static_cast<std::size_t>(x.rows()));
            parallel_for(pred.size(), nthreads, [&](std::size_t i) {
                pred[i] = classify(model, x.row(static_cast<Eigen::Index>(i)).transpose());
            });
            std::string out = "row,predicted\n";
            for (std::size_t i = 0; i < pred.size(); ++i) out += std::to_string(i) + ',' + std::to_string(pred[i]) + '\n';
            emit(pred_output, out);
            if (!truth.empty()) std::cerr << "error_rate=" << misclassification_rate(pred, truth) << '\n';
        } else if (*cv_cmd) {
            const auto data = io::read_dataset(cv_train);
            cv_grid.grid.seed = cv_seed;
            const auto r = cross_validate(data, cv_grid.grid, parse_variant(cv_variant), cv_solver.config(), nthreads);
            emit(cv_table, table_csv(r.table));
            if (!cv_params.empty()) {
                const auto& b = r.table[r.best_row];
                json j = {{"tau", b.tau},           {"lambda", b.lambda},
                          {"kappa_factor", b.kappa_factor}, {"mean_error", b.mean_error},
                          {"sd_error", b.sd_error}, {"variant", cv_variant}};
                emit(cv_params, j.dump(2) + "\n");
            }
            std::cout << cv_summary(r) << '\n';
        } else if (*sim_cmd) {
            scn.model = parse_sim_model(sim_model);
            scn.seed = sim_seed;
            scn.mean_seed = sim_mean_seed.value_or(sim_seed);
            const auto d = simulate(scn);
            std::filesystem::create_directories(sim_dir);
            const auto dir = std::filesystem::path(sim_dir);
            emit((dir / "train.csv").string(), io::labeled_csv(d.train.labels, d.train.observations));
            emit((dir / "test.csv").string(), io::labeled_csv(d.test.labels, d.test.observations));
            json truth = {{"model", to_string(scn.model)},
                          {"sigma2", scn.sigma2},
                          {"p", scn.p},
                          {"n_total", scn.n_total},
                          {"n_train", scn.n_train},
                          {"seed", scn.seed},
                          {"mean_seed", scn.mean_seed},
                          {"common_covariance", d.truth.common_covariance},
                          {"signal_coords", d.truth.signal_coords},
                          {"true_means", io::matrix_json(d.truth.true_means)}};
            emit((dir / "truth.json").string(), truth.dump(2) + "\n");
        } else if (*bench_cmd) {
            std::vector<std::pair<std::string, double>> rows;
            if (bench_all) {
                rows = {{"sim1", 1}, {"sim1", 4}, {"sim2", 1}, {"sim3", 1}, {"sim3", 3}};
            } else {
                if (bench_models.size() != bench_sigma2.size())
                    throw ValidationError("usage", "--model and --sigma2 need the same number of entries");
                for (std::size_t i = 0; i < bench_models.size(); ++i) rows.emplace_back(bench_models[i], bench_sigma2[i]);
            }
            bc.grid = bench_grid.grid;
            bc.solver = bench_solver.config();
            bc.threads = nthreads;
            std::vector<BenchRow> results;
            for (const auto& [m, s2] : rows) {
                bc.scenario.model = parse_sim_model(m);
                bc.scenario.sigma2 = s2;
                results.push_back(run_bench(bc));
            }
            std::ostringstream md, csv;
            write_bench_markdown(md, results);
            write_bench_csv(csv, results);
            std::cout << md.str();
            if (!bench_md.empty()) emit(bench_md, md.str());
            if (!bench_csv.empty()) emit(bench_csv, csv.str());
        } else if (*feat_cmd) {
            fc.family = parse_wavelet(feat_family);
            const auto records = io::read_records(feat_in, feat_channels);
            std::vector<int> labels;
            Matrix feats(static_cast<Eigen::Index>(records.size()), feat_channels * fc.coefficients);
            for (const auto& r : records) labels.push_back(r.label);
            parallel_for(records.size(), nthreads, [&](std::size_t i) {
                feats.row(static_cast<Eigen::Index>(i)) = featurize(records[i].channels, fc).transpose();
            });
            emit(feat_out, io::labeled_csv(labels, feats));
            json meta = {{"channels", feat_channels},
                         {"time_points", records.front().channels.cols()},
                         {"coefficients", fc.coefficients},
                         {"wavelet", to_string(fc.family)},
                         {"fft", "unnormalized, zero-padded to a power of two"},
                         {"features", feats.cols()}};
            emit(feat_out + ".json", meta.dump(2) + "\n");
        } else if (*diag_cmd) {
            tc.threads = nthreads;
            std::ostringstream os;
            os.precision(10);
            const auto model = sim2_like(diag_p, tc.seed);
            if (diag_exp == "consistency") {
                write_consistency_csv(os, consistency_experiment(model, tc));
            } else if (diag_exp == "optimality") {
                write_optimality_csv(os, optimality_experiment({model.means.topRows(2), model.cov}, tc));
            } else if (diag_exp == "identities") {
                const auto ctx = build_theory(model.cov, model.means);
                const Matrix sinv = model.cov.inverse();
                os << "identity,max_residual\n";
                double gap_residual = 0;
                for (int i = 0; i < 3; ++i)
                    for (int j = i + 1; j < 3; ++j) {
                        const Vector delta = (ctx.means.row(j) - ctx.means.row(i)).transpose();
                        gap_residual = std::max(gap_residual, (ctx.d * delta - sinv * delta).norm() / (sinv * delta).norm());
                    }
                os << "precision_gap_map," << gap_residual << '\n';
                const Matrix g = ctx.gammas * ctx.gammas.transpose();
                os << "gamma_orthonormal," << (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() << '\n';
                const auto two = build_theory(model.cov, model.means.topRows(2));
                const Vector d2 = (two.means.row(1) - two.means.row(0)).transpose();
                os << "separation_equals_4_lambda1,"
                   << std::abs(d2.dot(sinv * d2) - 4 * two.eigvals[0]) / (4 * two.eigvals[0]) << '\n';
                os << "lambda_p," << ctx.lambda_p << '\n';
            } else {
                throw ValidationError("usage", "unknown experiment '" + diag_exp + "'");
            }
            if (diag_out.empty())
                std::cout << os.str();
            else
                emit(diag_out, os.str());
        }
    } catch (const sfda::Error& e) {
        return report(e.tag(), static_cast<int>(e.code()), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return report("io", 4, e.what());
    } catch (const std::bad_alloc&) {
        return report("out_of_memory", 4, "out of memory");
    } catch (const std::exception& e) {
        return report("internal", 2, e.what());
    }
    return 0;
}
