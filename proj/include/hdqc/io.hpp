#pragma once

#include "hdqc/discriminant.hpp"
#include "hdqc/estimators.hpp"
#include "hdqc/evaluation.hpp"
#include "hdqc/feature_selection.hpp"
#include "hdqc/simulation.hpp"
#include "hdqc/summaries.hpp"
#include "hdqc/theory.hpp"
#include "hdqc/types.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hdqc::io {

using json = nlohmann::json;

/// Shortest round-trip decimal representation; identical bytes for identical
/// doubles, so fixed seeds give byte-identical output files.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Compact "(=0.289p)" style multiple-of-p annotation.
inline std::string per_p_annotation(double value, Index p) {
    std::ostringstream os;
    os << " (=" << std::setprecision(3) << value / double(p) << "p)";
    return os.str();
}

struct ReadError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Dataset CSV: one row per sample, first column the class label, then p real
// values. An optional header row starts with "label". Classes keep the order
// in which their labels first appear.

inline Dataset read_dataset_csv(std::istream& in) {
    std::map<std::string, std::size_t> label_index;
    std::vector<std::string> labels;
    std::vector<std::vector<std::vector<double>>> rows;
    std::string line;
    Index p = -1;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (line_no == 1 && fields.front().rfind("label", 0) == 0) continue;
        if (fields.size() < 2)
            throw ReadError("dataset csv line " + std::to_string(line_no) + ": need label,values");
        if (p < 0) p = static_cast<Index>(fields.size()) - 1;
        if (static_cast<Index>(fields.size()) - 1 != p)
            throw ReadError("dataset csv line " + std::to_string(line_no) +
                            ": inconsistent column count");
        const std::string& label = fields.front();
        auto [it, inserted] = label_index.try_emplace(label, labels.size());
        if (inserted) {
            labels.push_back(label);
            rows.emplace_back();
        }
        std::vector<double> values(p);
        for (Index j = 0; j < p; ++j) {
            const std::string& f = fields[static_cast<std::size_t>(j) + 1];
            const auto res = std::from_chars(f.data(), f.data() + f.size(), values[j]);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size())
                throw ReadError("dataset csv line " + std::to_string(line_no) +
                                ": bad number '" + f + "'");
        }
        rows[it->second].push_back(std::move(values));
    }
    if (labels.empty()) throw ReadError("dataset csv: no data rows");

    Dataset out;
    out.labels = labels;
    for (const auto& cls : rows) {
        MatrixXd m(static_cast<Index>(cls.size()), p);
        for (std::size_t r = 0; r < cls.size(); ++r)
            for (Index j = 0; j < p; ++j) m(static_cast<Index>(r), j) = cls[r][j];
        out.classes.push_back(std::move(m));
    }
    out.validate();
    return out;
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReadError("cannot open dataset file: " + path);
    return read_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (std::size_t c = 0; c < data.classes.size(); ++c) {
        const std::string label = data.labels.empty() ? std::to_string(c + 1) : data.labels[c];
        for (Index r = 0; r < data.classes[c].rows(); ++r) {
            out << label;
            for (Index j = 0; j < data.classes[c].cols(); ++j)
                out << ',' << format_double(data.classes[c](r, j));
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Model persistence. Doubles go through the shortest-round-trip writer, so a
// save/load cycle reproduces every stored value bit for bit.

inline json precision_to_json(const PrecisionSpec& spec) {
    json j;
    if (spec.is_identity()) {
        j["kind"] = "identity";
    } else if (spec.is_scaled_identity()) {
        const auto& n = spec.as_scaled_identity();
        j["kind"] = "scaled_identity";
        j["scale"] = n.scale;
        j["log_det"] = n.log_det;
        j["p"] = n.p;
    } else if (spec.is_diagonal()) {
        const auto& n = spec.as_diagonal();
        j["kind"] = "diagonal";
        j["values"] = std::vector<double>(n.values.begin(), n.values.end());
        j["log_det"] = n.log_det;
    } else if (spec.is_full()) {
        const auto& n = spec.as_full();
        j["kind"] = "full";
        const auto& m = *n.precision;
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(m.size()));
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));  // row-major
        j["rows"] = m.rows();
        j["matrix"] = std::move(flat);
        j["log_det"] = n.log_det;
    } else {
        const auto& n = spec.as_feature_restricted();
        j["kind"] = "feature_restricted";
        j["indices"] = n.indices;
        j["values"] = std::vector<double>(n.values.begin(), n.values.end());
        j["log_det"] = n.log_det;
    }
    return j;
}

inline PrecisionSpec precision_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "identity") return PrecisionSpec::identity();
    if (kind == "scaled_identity")
        return PrecisionSpec::scaled_identity(j.at("scale").get<double>(),
                                              j.at("p").get<Index>());
    if (kind == "diagonal") {
        const auto vals = j.at("values").get<std::vector<double>>();
        return PrecisionSpec::diagonal(Eigen::Map<const VectorXd>(vals.data(),
                                                                  static_cast<Index>(vals.size())));
    }
    if (kind == "full") {
        const Index rows = j.at("rows").get<Index>();
        const auto flat = j.at("matrix").get<std::vector<double>>();
        if (static_cast<Index>(flat.size()) != rows * rows)
            throw ReadError("model json: full precision size mismatch");
        MatrixXd m(rows, rows);
        for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < rows; ++c)
                m(r, c) = flat[static_cast<std::size_t>(r * rows + c)];
        return PrecisionSpec::full_from_precision(std::move(m), j.at("log_det").get<double>());
    }
    if (kind == "feature_restricted") {
        auto idx = j.at("indices").get<std::vector<Index>>();
        const auto vals = j.at("values").get<std::vector<double>>();
        return PrecisionSpec::feature_restricted(
            std::move(idx),
            Eigen::Map<const VectorXd>(vals.data(), static_cast<Index>(vals.size())));
    }
    throw ReadError("model json: unknown precision kind '" + kind + "'");
}

inline json model_to_json(const TrainedClassifier& model) {
    json j;
    j["format"] = "hdqc-model";
    j["version"] = 1;
    j["variant"] = std::string(variant_name(model.variant));
    j["include_log_det"] = model.include_log_det;
    j["standardization"] = model.standardization;
    if (!model.selected.empty()) j["selected"] = model.selected;
    if (model.fs_fallback) j["fs_fallback"] = true;
    json classes = json::array();
    for (const auto& c : model.classes) {
        json jc;
        jc["label"] = c.label;
        jc["n"] = c.n;
        jc["mean"] = std::vector<double>(c.mean.begin(), c.mean.end());
        jc["bias"] = c.bias;
        jc["log_det"] = c.spec.log_det();
        jc["precision"] = precision_to_json(c.spec);
        classes.push_back(std::move(jc));
    }
    j["classes"] = std::move(classes);
    return j;
}

inline TrainedClassifier model_from_json(const json& j) {
    if (j.value("format", "") != "hdqc-model") throw ReadError("model json: wrong format tag");
    TrainedClassifier model;
    model.variant = parse_variant(j.at("variant").get<std::string>());
    model.include_log_det = j.at("include_log_det").get<bool>();
    model.standardization = j.value("standardization", 1.0);
    if (j.contains("selected")) model.selected = j.at("selected").get<std::vector<Index>>();
    model.fs_fallback = j.value("fs_fallback", false);
    for (const auto& jc : j.at("classes")) {
        ClassRule rule;
        rule.label = jc.at("label").get<std::string>();
        rule.n = jc.at("n").get<Index>();
        const auto mean = jc.at("mean").get<std::vector<double>>();
        rule.mean = Eigen::Map<const VectorXd>(mean.data(), static_cast<Index>(mean.size()));
        rule.bias = jc.at("bias").get<double>();
        rule.spec = precision_from_json(jc.at("precision"));
        model.classes.push_back(std::move(rule));
    }
    if (model.classes.empty()) throw ReadError("model json: no classes");
    const Index p = model.classes.front().mean.size();
    for (const auto& rule : model.classes) {
        if (rule.mean.size() != p) throw ReadError("model json: classes disagree on p");
        if (rule.spec.is_diagonal() && rule.spec.as_diagonal().values.size() != p)
            throw ReadError("model json: diagonal precision size mismatch");
        if (rule.spec.is_full() && rule.spec.as_full().precision->rows() != p)
            throw ReadError("model json: full precision size mismatch");
        if (rule.spec.is_feature_restricted() &&
            rule.spec.as_feature_restricted().indices.back() >= p)
            throw ReadError("model json: restricted index out of range");
    }
    return model;
}

inline void save_model(const std::string& path, const TrainedClassifier& model) {
    std::ofstream out(path);
    if (!out) throw ReadError("cannot write model file: " + path);
    out << model_to_json(model).dump(2) << '\n';
}

inline TrainedClassifier load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReadError("cannot open model file: " + path);
    json j;
    in >> j;
    return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Scenario configuration files. A named id pulls the catalog defaults; any
// field present overrides it.

inline ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig c = scenario_config(parse_scenario(j.value("id", "custom")));
    if (j.contains("grid")) c.grid = j.at("grid").get<std::vector<Index>>();
    if (j.contains("reps")) c.replications = j.at("reps").get<Index>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fixed_training")) c.fixed_training = j.at("fixed_training").get<bool>();
    if (j.contains("sample_size")) {
        const auto& s = j.at("sample_size");
        const std::string rule = s.at("rule");
        if (rule == "fixed") {
            c.size_rule = SampleSizeRule::fixed;
            c.n1 = s.at("n1").get<Index>();
            c.n2 = s.at("n2").get<Index>();
        } else if (rule == "log2") {
            c.size_rule = SampleSizeRule::log2_double;
        } else if (rule == "logsq") {
            c.size_rule = SampleSizeRule::logsq_double;
        } else {
            throw ReadError("scenario json: unknown sample size rule '" + rule + "'");
        }
    }
    if (j.contains("mean_rule")) {
        const std::string rule = j.at("mean_rule");
        if (rule == "zero")
            c.mean_rule = MeanRule::zero;
        else if (rule == "first-p23")
            c.mean_rule = MeanRule::first_p23_ones;
        else if (rule == "last-p23")
            c.mean_rule = MeanRule::last_p23_ones;
        else if (rule == "last-sqrtp")
            c.mean_rule = MeanRule::last_sqrtp_ones;
        else
            throw ReadError("scenario json: unknown mean rule '" + rule + "'");
    }
    auto parse_builder = [](const json& jb) {
        CovBuilder b;
        const std::string kind = jb.at("kind");
        if (kind == "power-decay")
            b.kind = CovBuilder::Kind::power_decay;
        else if (kind == "scaled-power-decay")
            b.kind = CovBuilder::Kind::scaled_power_decay;
        else if (kind == "scaled-identity")
            b.kind = CovBuilder::Kind::scaled_identity;
        else if (kind == "tail-spiked")
            b.kind = CovBuilder::Kind::tail_spiked;
        else
            throw ReadError("scenario json: unknown covariance kind '" + kind + "'");
        b.factor = jb.value("factor", 1.0);
        return b;
    };
    if (j.contains("covariance")) {
        const auto& arr = j.at("covariance");
        if (!arr.is_array() || arr.size() != 2)
            throw ReadError("scenario json: covariance must list two builders");
        c.cov1 = parse_builder(arr[0]);
        c.cov2 = parse_builder(arr[1]);
    }
    if (j.contains("family")) {
        const auto& f = j.at("family");
        const std::string kind = f.at("kind");
        if (kind == "gaussian") {
            c.family.kind = DistFamily::Kind::gaussian;
        } else if (kind == "student-t") {
            c.family.kind = DistFamily::Kind::student_t;
            c.family.nu = f.value("nu", 8.0);
        } else {
            throw ReadError("scenario json: unknown family '" + kind + "'");
        }
    }
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReadError("cannot open scenario file: " + path);
    json j;
    in >> j;
    return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Report writers.

inline void write_monte_carlo_csv(std::ostream& out, const MonteCarloReport& report,
                                  const std::string& provenance) {
    out << "# " << provenance << '\n';
    out << "# seed=" << report.seed << '\n';
    out << "scenario,p,classifier,e1,e2,ebar,se,failures,phi_overlay\n";
    for (const auto& r : report.rows) {
        out << r.scenario << ',' << r.p << ',' << r.classifier << ',' << format_double(r.e1)
            << ',' << format_double(r.e2) << ',' << format_double(r.ebar) << ','
            << format_double(r.se) << ',' << r.failures << ',';
        if (r.phi_overlay) out << format_double(*r.phi_overlay);
        out << '\n';
    }
}

inline void write_monte_carlo_json(std::ostream& out, const MonteCarloReport& report,
                                   const std::string& provenance) {
    json j;
    j["provenance"] = provenance;
    j["seed"] = report.seed;
    json rows = json::array();
    for (const auto& r : report.rows) {
        json jr;
        jr["scenario"] = r.scenario;
        jr["p"] = r.p;
        jr["classifier"] = r.classifier;
        jr["replications"] = r.replications;
        jr["e1"] = r.e1;
        jr["e2"] = r.e2;
        jr["ebar"] = r.ebar;
        jr["se1"] = r.se1;
        jr["se2"] = r.se2;
        jr["se"] = r.se;
        jr["failures"] = r.failures;
        if (r.phi_overlay) jr["phi_overlay"] = *r.phi_overlay;
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    out << j.dump(2) << '\n';
}

struct TheoryRow {
    Index p = 0;
    std::string classifier;
    int cls = 0;
    double delta = 0;
    double delta_small = 0;
    double phi_error = 0;
    std::optional<double> bayes_error;
};

inline void write_theory_csv(std::ostream& out, const std::vector<TheoryRow>& rows,
                             const std::string& provenance) {
    out << "# " << provenance << '\n';
    out << "p,classifier,class,Delta,delta_small,phi_error,bayes_error\n";
    for (const auto& r : rows) {
        out << r.p << ',' << r.classifier << ',' << r.cls << ',' << format_double(r.delta) << ','
            << format_double(r.delta_small) << ',' << format_double(r.phi_error) << ',';
        if (r.bayes_error) out << format_double(*r.bayes_error);
        out << '\n';
    }
}

inline void write_selection_csv(std::ostream& out, const FeatureSelectionResult& result,
                                const std::string& provenance) {
    out << "# " << provenance << '\n';
    out << "# gamma=" << format_double(result.gamma)
        << " threshold=" << format_double(result.threshold)
        << " selected=" << result.p_star_hat << '\n';
    out << "j,theta_hat,selected\n";
    std::size_t next = 0;
    for (Index j = 0; j < result.theta_hat.size(); ++j) {
        const bool sel = next < result.selected.size() && result.selected[next] == j;
        if (sel) ++next;
        out << j << ',' << format_double(result.theta_hat[j]) << ',' << (sel ? 1 : 0) << '\n';
    }
}

inline void write_diagnose_text(std::ostream& out, const SparsityReport& r,
                                const std::string& pair_label = "") {
    if (!pair_label.empty()) out << "pair=" << pair_label << '\n';
    out << "p=" << r.p << '\n';
    for (std::size_t i = 0; i < r.n.size(); ++i)
        out << "n" << (i + 1) << "=" << r.n[i] << '\n';
    out << "delta_I_hat=" << format_double(r.delta_I_hat) << per_p_annotation(r.delta_I_hat, r.p)
        << '\n';
    for (std::size_t i = 0; i < r.delta_II_hat.size(); ++i)
        out << "delta_II_hat_" << (i + 1) << "=" << format_double(r.delta_II_hat[i]) << '\n';
    out << "delta_sigma_hat=" << format_double(r.delta_sigma_hat)
        << per_p_annotation(r.delta_sigma_hat, r.p) << '\n';
    for (std::size_t i = 0; i < r.trsq_hat.size(); ++i)
        out << "trsq_hat_" << (i + 1) << "=" << format_double(r.trsq_hat[i]) << '\n';
    for (std::size_t i = 0; i < r.lambda_max_hat.size(); ++i)
        out << "lambda_max_hat_" << (i + 1) << "=" << format_double(r.lambda_max_hat[i])
            << per_p_annotation(r.lambda_max_hat[i], r.p) << '\n';
    if (r.conditions.defined) {
        out << "c1=" << format_double(r.conditions.c1) << '\n';
        out << "c2=" << format_double(r.conditions.c2) << '\n';
    } else {
        out << "c1=undefined (delta_I_hat <= 0)\n";
        out << "c2=undefined (delta_I_hat <= 0)\n";
    }
    for (std::size_t i = 0; i < r.sphericity.size(); ++i)
        out << "sphericity_" << (i + 1) << "=" << format_double(r.sphericity[i]) << '\n';
}

inline json diagnose_to_json(const SparsityReport& r) {
    json j;
    j["p"] = r.p;
    j["n"] = r.n;
    j["delta_I_hat"] = r.delta_I_hat;
    j["delta_I_hat_per_p"] = r.delta_I_hat / double(r.p);
    j["delta_II_hat"] = r.delta_II_hat;
    j["delta_sigma_hat"] = r.delta_sigma_hat;
    j["delta_sigma_hat_per_p"] = r.delta_sigma_hat / double(r.p);
    j["trsq_hat"] = r.trsq_hat;
    j["lambda_max_hat"] = r.lambda_max_hat;
    std::vector<double> lam_per_p;
    for (const double l : r.lambda_max_hat) lam_per_p.push_back(l / double(r.p));
    j["lambda_max_hat_per_p"] = lam_per_p;
    if (r.conditions.defined) {
        j["c1"] = r.conditions.c1;
        j["c2"] = r.conditions.c2;
    } else {
        j["c1"] = nullptr;
        j["c2"] = nullptr;
    }
    j["sphericity"] = r.sphericity;
    return j;
}

inline void write_evaluation_csv(std::ostream& out, const EvaluationReport& report,
                                 const std::string& provenance) {
    out << "# " << provenance << '\n';
    out << "classifier,label,errors,size\n";
    for (const auto& ev : report.results) {
        const std::string name(variant_name(ev.variant));
        if (ev.failed) {
            out << name << ",failed,," << '\n';
            continue;
        }
        for (std::size_t c = 0; c < report.labels.size(); ++c)
            out << name << ',' << report.labels[c] << ',' << ev.errors_per_class[c] << ','
                << report.class_sizes[c] << '\n';
        out << name << ",total," << ev.total_errors << ',' << ev.total << '\n';
    }
}

inline void write_evaluation_table(std::ostream& out, const EvaluationReport& report) {
    out << "classifier";
    for (const auto& l : report.labels) out << "  " << l;
    out << "  error rate\n";
    for (const auto& ev : report.results) {
        out << variant_name(ev.variant);
        if (ev.failed) {
            out << "  failed: " << ev.error << '\n';
            continue;
        }
        for (std::size_t c = 0; c < report.labels.size(); ++c)
            out << "  " << ev.errors_per_class[c] << '/' << report.class_sizes[c];
        out << "  " << ev.fraction();
        if (ev.fold_failures > 0) out << "  (" << ev.fold_failures << " folds failed)";
        out << '\n';
    }
}

}  // namespace hdqc::io
