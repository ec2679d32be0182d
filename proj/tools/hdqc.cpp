// Command-line front end: simulate | theory | diagnose | fit | classify |
// loocv | select-features. Data goes to files or stdout, diagnostics to
// stderr. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
// failure.

#include "hdqc/evaluation.hpp"
#include "hdqc/io.hpp"
#include "hdqc/simulation.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace hdqc;

std::vector<Index> parse_grid(const std::string& text) {
    std::vector<Index> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<Index>(std::stoll(item)));
    }
    if (out.empty()) throw ConfigError("empty dimension grid");
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Writes to the given path, or to stdout when the path is empty.
class OutputTarget {
  public:
    explicit OutputTarget(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw io::ReadError("cannot open output file: " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

struct SimulateArgs {
    std::string scenario = "fig2c";
    std::string config_path;
    std::string grid = "64,256,1024";
    Index reps = 2000;
    std::uint64_t seed = 0;
    std::string classifiers = "I,II,III,IV";
    int workers = 0;
    bool overlay = false;
    bool fixed_training = false;
    double nu = 0;  // 0 = keep scenario default
    double gamma = 0.5;
    double threshold_constant = 2.0;
    bool keep_diagonal = false;
    std::string out;
    std::string format = "csv";
};

int run_simulate(const SimulateArgs& args) {
    ScenarioConfig config = args.config_path.empty()
                                ? scenario_config(parse_scenario(args.scenario))
                                : io::load_scenario(args.config_path);
    config.grid = parse_grid(args.grid);
    config.replications = args.reps;
    config.seed = args.seed;
    config.fixed_training = args.fixed_training;
    if (args.nu > 0) config.family.nu = args.nu;

    std::vector<ClassifierId> classifiers;
    for (const auto& name : split_list(args.classifiers))
        classifiers.push_back(parse_classifier(name));

    MonteCarloOptions options;
    options.workers = args.workers;
    options.with_overlay = args.overlay;
    options.fit.gamma = args.gamma;
    options.fit.threshold_constant = args.threshold_constant;
    options.fit.keep_diagonal = args.keep_diagonal;

    const auto report = run_monte_carlo(config, classifiers, options);

    std::ostringstream provenance;
    provenance << "hdqc simulate scenario=" << scenario_name(config.id) << " grid=" << args.grid
               << " reps=" << args.reps << " seed=" << args.seed
               << " classifiers=" << args.classifiers;
    if (args.overlay) provenance << " overlay=1";
    if (args.fixed_training) provenance << " fixed-training=1";

    OutputTarget target(args.out);
    if (args.format == "json")
        io::write_monte_carlo_json(target.stream(), report, provenance.str());
    else
        io::write_monte_carlo_csv(target.stream(), report, provenance.str());
    std::cerr << "simulate: " << report.rows.size() << " rows in " << report.wall_seconds
              << " s\n";
    return 0;
}

struct TheoryArgs {
    std::string scenario = "fig1a";
    std::string config_path;
    std::string grid = "8,64,512";
    std::string classifiers = "I,III,IV";
    std::string out;
    std::string format = "csv";
};

int run_theory(const TheoryArgs& args) {
    ScenarioConfig config = args.config_path.empty()
                                ? scenario_config(parse_scenario(args.scenario))
                                : io::load_scenario(args.config_path);
    config.grid = parse_grid(args.grid);

    std::vector<Choice> choices;
    for (const auto& name : split_list(args.classifiers)) {
        const auto id = parse_classifier(name);
        if (!id.oracle)
            throw ConfigError("theory: classifiers must be precision choices I, II, III or IV");
        choices.push_back(id.choice);
    }

    std::vector<io::TheoryRow> rows;
    for (const Index p : config.grid) {
        const ResolvedScenario rs = resolve_scenario(config, p);
        const bool equal_cov =
            !((rs.pop.sigma(0) - rs.pop.sigma(1)).array().abs() > 1e-10).any();
        for (const Choice choice : choices) {
            const auto tq = theory_quantities(rs.pop, choice, rs.n1, rs.n2);
            for (int cls = 0; cls < 2; ++cls) {
                io::TheoryRow row;
                row.p = p;
                row.classifier = choice_name(choice);
                row.cls = cls + 1;
                row.delta = tq.delta[cls];
                row.delta_small = tq.delta_small[cls];
                row.phi_error = tq.asymptotic_error[cls];
                if (equal_cov) {
                    row.bayes_error = tq.bayes_error;
                } else if (rs.pop.mu12().squaredNorm() > 0) {
                    row.bayes_error = bayes_error_unequal_cov_gaussian(rs.pop, cls);
                }
                rows.push_back(std::move(row));
            }
        }
    }

    std::ostringstream provenance;
    provenance << "hdqc theory scenario=" << scenario_name(config.id) << " grid=" << args.grid
               << " classifiers=" << args.classifiers;
    OutputTarget target(args.out);
    io::write_theory_csv(target.stream(), rows, provenance.str());
    return 0;
}

struct DiagnoseArgs {
    std::string data;
    std::string out;
    std::string format = "kv";
    bool no_standardize = false;
};

int run_diagnose(const DiagnoseArgs& args) {
    Dataset data = io::read_dataset_csv(args.data);
    double factor = 1.0;
    if (!args.no_standardize) {
        auto standardized = standardize_global(data);
        factor = standardized.factor;
        data = std::move(standardized.data);
    }

    OutputTarget target(args.out);
    auto& out = target.stream();
    const bool as_json = args.format == "json";
    io::json all = io::json::array();
    for (std::size_t a = 0; a < data.num_classes(); ++a) {
        for (std::size_t b = a + 1; b < data.num_classes(); ++b) {
            const auto report = diagnose_pair(data.classes[a], data.classes[b]);
            const std::string pair_label = data.labels[a] + "," + data.labels[b];
            if (as_json) {
                io::json j = io::diagnose_to_json(report);
                j["pair"] = pair_label;
                j["standardization"] = factor;
                all.push_back(std::move(j));
            } else {
                if (data.num_classes() > 2 || a > 0) out << "pair=" << pair_label << '\n';
                io::write_diagnose_text(out, report);
                out << "standardization=" << io::format_double(factor) << '\n';
            }
        }
    }
    if (as_json) out << all.dump(2) << '\n';
    return 0;
}

struct FitArgs {
    std::string data;
    std::string variant = "dbda";
    double gamma = 0.5;
    double threshold_constant = 2.0;
    bool keep_diagonal = false;
    bool no_standardize = false;
    std::string out = "model.json";
};

int run_fit(const FitArgs& args) {
    const Dataset raw = io::read_dataset_csv(args.data);
    double factor = 1.0;
    Dataset data = raw;
    if (!args.no_standardize) {
        auto standardized = standardize_global(raw);
        factor = standardized.factor;
        data = std::move(standardized.data);
    }
    FitOptions options;
    options.gamma = args.gamma;
    options.threshold_constant = args.threshold_constant;
    options.keep_diagonal = args.keep_diagonal;
    auto model = fit(data, parse_variant(args.variant), options);
    model.standardization = factor;
    if (model.fs_fallback)
        std::cerr << "fit: feature selection is empty; scoring falls back to dbda\n";
    io::save_model(args.out, model);
    std::cerr << "fit: wrote " << args.out << '\n';
    return 0;
}

struct ClassifyArgs {
    std::string model;
    std::string data;
    std::string out;
    bool strict_ties = false;
};

int run_classify(const ClassifyArgs& args) {
    const auto model = io::load_model(args.model);
    const Dataset data = io::read_dataset_csv(args.data);
    if (data.dim() != model.dim())
        throw DimensionError("classify: data dimension does not match the model");
    const TieBreak tie_break =
        args.strict_ties ? TieBreak::prefer_later : TieBreak::lowest_index;

    OutputTarget target(args.out);
    auto& out = target.stream();
    out << "row,label,predicted,tie\n";
    Index row = 0;
    Index correct = 0, known = 0;
    for (std::size_t c = 0; c < data.classes.size(); ++c) {
        for (Index r = 0; r < data.classes[c].rows(); ++r, ++row) {
            const VectorXd x0 =
                data.classes[c].row(r).transpose() / model.standardization;
            const auto result = classify(x0, model, tie_break);
            const std::string& given = data.labels[c];
            const std::string& predicted =
                model.classes[static_cast<std::size_t>(result.cls)].label;
            out << row << ',' << given << ',' << predicted << ',' << (result.tie ? 1 : 0)
                << '\n';
            bool label_known = false;
            for (const auto& rule : model.classes)
                if (rule.label == given) label_known = true;
            if (label_known) {
                ++known;
                if (predicted == given) ++correct;
            }
        }
    }
    if (known > 0)
        std::cerr << "classify: " << correct << "/" << known
                  << " labeled rows match the prediction\n";
    return 0;
}

struct LoocvArgs {
    std::string data;
    std::string classifiers = "dbda,gqda,dlda-bc,dqda-bc,fs-dqda";
    double gamma = 0.5;
    std::string gamma_grid;
    double threshold_constant = 2.0;
    bool keep_diagonal = false;
    bool paper_standardization = false;
    bool strict_ties = false;
    std::string out;
    std::string format = "csv";
};

int run_loocv(const LoocvArgs& args) {
    const Dataset data = io::read_dataset_csv(args.data);
    EvalOptions options;
    options.classifiers.clear();
    for (const auto& name : split_list(args.classifiers))
        options.classifiers.push_back(parse_variant(name));
    options.fit.threshold_constant = args.threshold_constant;
    options.fit.keep_diagonal = args.keep_diagonal;
    options.paper_standardization = args.paper_standardization;
    options.tie_break = args.strict_ties ? TieBreak::prefer_later : TieBreak::lowest_index;

    std::vector<double> gammas{args.gamma};
    if (!args.gamma_grid.empty()) {
        gammas.clear();
        for (const auto& g : split_list(args.gamma_grid)) gammas.push_back(std::stod(g));
    }

    OutputTarget target(args.out);
    const bool to_file = !args.out.empty();
    for (const double gamma : gammas) {
        options.fit.gamma = gamma;
        const auto report = loocv(data, options);
        std::ostringstream provenance;
        provenance << "hdqc loocv data=" << args.data << " gamma=" << io::format_double(gamma)
                   << " classifiers=" << args.classifiers
                   << (args.paper_standardization ? " paper-standardization=1" : "");
        if (gammas.size() > 1) std::cout << "gamma=" << gamma << '\n';
        io::write_evaluation_table(std::cout, report);
        if (to_file) {
            if (args.format == "json") {
                io::json j;
                j["provenance"] = provenance.str();
                j["gamma"] = gamma;
                j["standardization"] = report.standardization;
                io::json results = io::json::array();
                for (const auto& ev : report.results) {
                    io::json je;
                    je["classifier"] = std::string(variant_name(ev.variant));
                    je["errors_per_class"] = ev.errors_per_class;
                    je["total_errors"] = ev.total_errors;
                    je["total"] = ev.total;
                    je["fraction"] = ev.fraction();
                    je["fold_failures"] = ev.fold_failures;
                    results.push_back(std::move(je));
                }
                j["results"] = std::move(results);
                target.stream() << j.dump(2) << '\n';
            } else {
                io::write_evaluation_csv(target.stream(), report, provenance.str());
            }
        }
    }
    return 0;
}

struct SelectArgs {
    std::string data;
    double gamma = 0.5;
    std::string out;
};

int run_select(const SelectArgs& args) {
    const Dataset data = io::read_dataset_csv(args.data);
    const auto result = select_features(data.summaries(), args.gamma);
    std::ostringstream provenance;
    provenance << "hdqc select-features data=" << args.data;
    OutputTarget target(args.out);
    io::write_selection_csv(target.stream(), result, provenance.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-dimensional bias-corrected quadratic classifiers"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo error-rate experiments");
    simulate->add_option("--scenario", sim.scenario,
                         "named scenario (fig1a fig1b fig2c fig2d sim5a sim5b sim5c sim5d)");
    simulate->add_option("--config", sim.config_path, "scenario JSON file")
        ->excludes(simulate->get_option("--scenario"));
    simulate->add_option("--grid", sim.grid, "comma-separated dimensions");
    simulate->add_option("--reps", sim.reps, "replications per grid point");
    simulate->add_option("--seed", sim.seed, "root seed");
    simulate->add_option("--classifiers", sim.classifiers,
                         "comma-separated: I II III IV dbda gqda dlda-bc dqda-bc fs-dqda "
                         "sample-precision thresholded");
    simulate->add_option("--workers", sim.workers, "worker threads (default: logical cores)");
    simulate->add_flag("--overlay", sim.overlay, "attach asymptotic error overlays");
    simulate->add_flag("--fixed-training", sim.fixed_training,
                       "draw one training set per grid point instead of per replication");
    simulate->add_option("--nu", sim.nu, "student-t degrees of freedom override");
    simulate->add_option("--gamma", sim.gamma, "fs-dqda screening exponent");
    simulate->add_option("--threshold-constant", sim.threshold_constant,
                         "M' for the thresholded variant");
    simulate->add_flag("--keep-diagonal", sim.keep_diagonal,
                       "exempt the diagonal from hard thresholding");
    simulate->add_option("--out", sim.out, "output file (default: stdout)");
    simulate->add_option("--format", sim.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    TheoryArgs theory;
    auto* theory_cmd = app.add_subcommand("theory", "asymptotic error-rate curves");
    theory_cmd->add_option("--scenario", theory.scenario, "named scenario");
    theory_cmd->add_option("--config", theory.config_path, "scenario JSON file")
        ->excludes(theory_cmd->get_option("--scenario"));
    theory_cmd->add_option("--grid", theory.grid, "comma-separated dimensions");
    theory_cmd->add_option("--classifiers", theory.classifiers, "precision choices (I II III IV)");
    theory_cmd->add_option("--out", theory.out, "output file (default: stdout)");
    theory_cmd->add_option("--format", theory.format, "csv")->check(CLI::IsMember({"csv"}));

    DiagnoseArgs diag;
    auto* diagnose = app.add_subcommand("diagnose", "scale-of-heterogeneity diagnostics");
    diagnose->add_option("--data", diag.data, "dataset CSV")->required();
    diagnose->add_option("--out", diag.out, "output file (default: stdout)");
    diagnose->add_option("--format", diag.format, "kv or json")
        ->check(CLI::IsMember({"kv", "json"}));
    diagnose->add_flag("--no-standardize", diag.no_standardize,
                       "skip the cohort trace standardization");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "train a classifier and save it as JSON");
    fit_cmd->add_option("--data", fit_args.data, "training CSV")->required();
    fit_cmd->add_option("--variant", fit_args.variant, "classifier variant");
    fit_cmd->add_option("--gamma", fit_args.gamma, "fs-dqda screening exponent");
    fit_cmd->add_option("--threshold-constant", fit_args.threshold_constant, "M'");
    fit_cmd->add_flag("--keep-diagonal", fit_args.keep_diagonal,
                      "exempt the diagonal from hard thresholding");
    fit_cmd->add_flag("--no-standardize", fit_args.no_standardize,
                      "skip the cohort trace standardization");
    fit_cmd->add_option("--out", fit_args.out, "model file");

    ClassifyArgs cls;
    auto* classify_cmd = app.add_subcommand("classify", "score samples with a saved model");
    classify_cmd->add_option("--model", cls.model, "model JSON")->required();
    classify_cmd->add_option("--data", cls.data, "samples CSV")->required();
    classify_cmd->add_option("--out", cls.out, "predictions CSV (default: stdout)");
    classify_cmd->add_flag("--strict-ties", cls.strict_ties,
                           "send exact score ties to the later class");

    LoocvArgs loo;
    auto* loocv_cmd = app.add_subcommand("loocv", "leave-one-out cross-validation");
    loocv_cmd->add_option("--data", loo.data, "dataset CSV")->required();
    loocv_cmd->add_option("--classifiers", loo.classifiers, "comma-separated variants");
    loocv_cmd->add_option("--gamma", loo.gamma, "fs-dqda screening exponent");
    loocv_cmd->add_option("--gamma-grid", loo.gamma_grid,
                          "comma-separated gammas; repeats the LOOCV per value");
    loocv_cmd->add_option("--threshold-constant", loo.threshold_constant, "M'");
    loocv_cmd->add_flag("--keep-diagonal", loo.keep_diagonal,
                        "exempt the diagonal from hard thresholding");
    loocv_cmd->add_flag("--paper-standardization", loo.paper_standardization,
                        "freeze one cohort factor instead of per-fold factors");
    loocv_cmd->add_flag("--strict-ties", loo.strict_ties,
                        "send exact score ties to the later class");
    loocv_cmd->add_option("--out", loo.out, "report file");
    loocv_cmd->add_option("--format", loo.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    SelectArgs sel;
    auto* select_cmd = app.add_subcommand("select-features", "heterogeneity screening report");
    select_cmd->add_option("--data", sel.data, "dataset CSV")->required();
    select_cmd->add_option("--gamma", sel.gamma, "screening exponent in (0,1)");
    select_cmd->add_option("--out", sel.out, "selection CSV (default: stdout)");

    try {
        app.parse(argc, argv);
        if (*simulate) return run_simulate(sim);
        if (*theory_cmd) return run_theory(theory);
        if (*diagnose) return run_diagnose(diag);
        if (*fit_cmd) return run_fit(fit_args);
        if (*classify_cmd) return run_classify(cls);
        if (*loocv_cmd) return run_loocv(loo);
        if (*select_cmd) return run_select(sel);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const hdqc::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const hdqc::io::ReadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const hdqc::SingularPrecisionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const hdqc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
