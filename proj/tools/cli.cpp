#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmgr/bench.hpp"
#include "mmgr/checkpoint.hpp"
#include "mmgr/dataset.hpp"
#include "mmgr/errors.hpp"
#include "mmgr/lexical.hpp"
#include "mmgr/metrics.hpp"
#include "mmgr/synthetic.hpp"
#include "mmgr/threads.hpp"
#include "mmgr/training.hpp"

namespace mmgr::cli {
namespace {

using Json = nlohmann::ordered_json;

struct DataArgs {
    std::string manifest;
    std::vector<std::string> stores;
};

struct TrainArgs {
    DataArgs data;
    std::string topology = "star";
    bool gated = false;
    std::size_t epochs = 200;
    std::size_t batch = 32;
    double lr = 2e-5;
    double lr_gamma = 0.9;
    std::size_t lr_step = 10;
    double w_neg = 1.0;
    double w_pos = 10.0;
    double weight_decay = 0.01;
    bool no_bias = false;
    std::optional<double> target_f1;
    std::uint64_t seed = 0;
    std::string out;
    std::string log;
};

struct EvalArgs {
    DataArgs data;
    std::string model;
    std::string split = "test";
    std::string report;
    std::string baseline = "none";
    std::optional<std::string> topology;
    bool macro = false;
};

struct PredictArgs {
    DataArgs data;
    std::string model;
    std::string qid;
    std::string split;
};

struct BenchArgs {
    std::string model;
    std::size_t nodes = 50;
    std::size_t repeat = 20;
    bool gated = false;
    std::uint64_t seed = 0;
};

struct SynthArgs {
    SyntheticSpec spec;
    std::string out;
};

void add_data_options(CLI::App* cmd, DataArgs& d) {
    cmd->add_option("--manifest", d.manifest, "Manifest (JSON Lines)")->required();
    cmd->add_option("--stores", d.stores, "Feature stores (MMQF), one or more")->required()->expected(1, -1);
}

Json data_json(const DataArgs& d) { return Json{{"manifest", d.manifest}, {"stores", d.stores}}; }

Dataset load(const DataArgs& d) {
    std::vector<std::filesystem::path> stores(d.stores.begin(), d.stores.end());
    return load_dataset(d.manifest, stores);
}

void echo_config(std::ostream& err, const std::string& command, Json options) {
    Json j;
    j["command"] = command;
    j["threads"] = worker_threads();
    j["options"] = std::move(options);
    err << Json{{"config", j}}.dump() << '\n';
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) err << Json{{"warning", w}}.dump() << '\n';
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig config;
    config.epochs = a.epochs;
    config.batch_size = a.batch;
    config.base_lr = a.lr;
    config.lr_gamma = a.lr_gamma;
    config.lr_step_epochs = a.lr_step;
    config.class_weights = {a.w_neg, a.w_pos};
    config.adamw.weight_decay = a.weight_decay;
    config.use_bias = !a.no_bias;
    config.target_f1 = a.target_f1;
    config.seed = a.seed;
    const Topology topology = parse_topology(a.topology);

    Json opts = data_json(a.data);
    opts["topology"] = a.topology;
    opts["gated"] = a.gated;
    opts["epochs"] = a.epochs;
    opts["batch"] = a.batch;
    opts["lr"] = a.lr;
    opts["lr_gamma"] = a.lr_gamma;
    opts["lr_step"] = a.lr_step;
    opts["class_weights"] = {a.w_neg, a.w_pos};
    opts["adamw"] = {{"beta1", config.adamw.beta1},
                     {"beta2", config.adamw.beta2},
                     {"eps", config.adamw.eps},
                     {"weight_decay", config.adamw.weight_decay}};
    opts["bias"] = config.use_bias;
    opts["target_f1"] = a.target_f1 ? Json(*a.target_f1) : Json(nullptr);
    opts["seed"] = a.seed;
    opts["out"] = a.out;
    opts["log"] = a.log;
    echo_config(err, "train", opts);
    config.validate();

    const Dataset dataset = load(a.data);
    print_warnings(err, dataset.warnings);

    std::ofstream log;
    if (!a.log.empty()) {
        if (auto parent = std::filesystem::path(a.log).parent_path(); !parent.empty())
            std::filesystem::create_directories(parent);
        log.open(a.log, std::ios::trunc);
        if (!log) throw IoError("cannot open log file " + a.log);
    }
    const FitResult result = fit(dataset, config, topology, a.gated, [&](const EpochLog& e) {
        const std::string line = epoch_log_json(e);
        out << line << '\n' << std::flush;
        if (log) log << line << '\n' << std::flush;
    });
    save_model(a.out, result.model);
    out << Json{{"best_epoch", result.best_epoch},
                {"best_val_f1", result.best_val_f1},
                {"validation_split", result.validation_split},
                {"model", a.out}}
               .dump()
        << '\n';
    return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    Json opts = data_json(a.data);
    opts["model"] = a.model;
    opts["split"] = a.split;
    opts["report"] = a.report;
    opts["baseline"] = a.baseline;
    opts["topology"] = a.topology ? Json(*a.topology) : Json(nullptr);
    opts["macro"] = a.macro;
    echo_config(err, "eval", opts);

    std::optional<Topology> expected;
    if (a.topology) expected = parse_topology(*a.topology);
    if (a.baseline == "none" && a.model.empty()) throw ConfigError("eval: --model is required unless --baseline is set");

    const Dataset dataset = load(a.data);
    print_warnings(err, dataset.warnings);
    const auto& instances = dataset.split(a.split);
    if (instances.empty()) throw ConfigError("eval: split '" + a.split + "' is empty");

    EvalReport report;
    if (a.baseline == "lexical") {
        report = make_report(lexical_overlap(instances), a.macro);
    } else {
        const Model model = load_model(a.model, expected);
        report = evaluate(model, dataset, a.split, a.macro);
    }
    print_warnings(err, report.warnings);
    out << report_table(report);
    if (!a.report.empty()) {
        std::ofstream f(a.report, std::ios::trunc);
        if (!f) throw IoError("cannot open report file " + a.report);
        f << report_json(report) << '\n';
    }
    return 0;
}

const QuestionInstance* find_question(const Dataset& d, const std::string& qid) {
    for (const auto* split : {&d.train, &d.dev, &d.test})
        for (const auto& inst : *split)
            if (inst.question_id == qid) return &inst;
    return nullptr;
}

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
    Json opts = data_json(a.data);
    opts["model"] = a.model;
    opts["qid"] = a.qid;
    opts["split"] = a.split;
    echo_config(err, "predict", opts);
    if (a.qid.empty() == a.split.empty()) throw ConfigError("predict: give exactly one of --qid or --split");

    const Dataset dataset = load(a.data);
    print_warnings(err, dataset.warnings);
    const Model model = load_model(a.model);

    std::vector<QuestionInstance> instances;
    if (!a.qid.empty()) {
        const auto* inst = find_question(dataset, a.qid);
        if (!inst) throw LookupError("predict: unknown question id '" + a.qid + "'");
        instances.push_back(*inst);
    } else {
        instances = dataset.split(a.split);
    }
    for (const auto& q : predict(model, dataset.features, dataset.meta.dims, instances)) {
        Json j;
        j["qid"] = q.question_id;
        j["category"] = q.category;
        j["sources"] = Json::array();
        j["positives"] = Json::array();
        for (const auto& s : q.sources) {
            j["sources"].push_back(Json{{"sid", s.source_id},
                                        {"modality", std::string(to_string(s.modality))},
                                        {"probability", s.score},
                                        {"predicted", s.predicted}});
            if (s.predicted) j["positives"].push_back(s.source_id);
        }
        out << j.dump() << '\n';
    }
    return 0;
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
    echo_config(err, "bench",
                Json{{"model", a.model}, {"nodes", a.nodes}, {"repeat", a.repeat}, {"gated", a.gated}, {"seed", a.seed}});
    Model model;
    if (a.model.empty()) {
        Rng rng(a.seed);
        model = Model(ModelSpec::reference(Topology::Star, a.gated), rng);
    } else {
        model = load_model(a.model, Topology::Star);
    }
    const BenchResult r = bench_forward(model, a.nodes, a.repeat, a.seed);
    out << Json{{"nodes", r.nodes},
                {"repeat", r.repeat},
                {"min_ms", r.min_ms},
                {"median_ms", r.median_ms},
                {"p95_ms", r.p95_ms},
                {"forwards_per_graph", r.forwards_per_graph}}
               .dump()
        << '\n';
    return 0;
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
    const SyntheticSpec& s = a.spec;
    echo_config(err, "synth",
                Json{{"questions", s.n_questions},
                     {"sources", s.sources_per_question},
                     {"positives", s.positives_per_question},
                     {"noise", s.noise_scale},
                     {"seed", s.seed},
                     {"dev", s.dev_questions},
                     {"test", s.test_questions},
                     {"text_dim", s.dims.text},
                     {"image_dim", s.dims.image},
                     {"out", a.out}});
    const auto paths = write_synthetic(generate_synthetic(s), a.out);
    out << Json{{"manifest", paths.manifest.string()},
                {"stores", {paths.text_store.string(), paths.image_store.string()}}}
               .dump()
        << '\n';
    return 0;
}

// Gives every option and flag a visible default in --help.
void document_defaults(CLI::App& app) {
    for (CLI::App* cmd : app.get_subcommands({})) {
        for (CLI::Option* o : cmd->get_options()) {
            if (o->get_name() == "--help" || o->get_required()) continue;
            if (o->get_expected_max() == 0) {
                o->description(o->get_description() + " (default: off)");
            } else if (o->get_default_str().empty()) {
                o->default_str("none");
            }
        }
    }
}

void emit_error(std::ostream& err, const std::string& code, const std::string& message) {
    err << Json{{"code", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph neural network source retrieval engine", "mmgr"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Train a model and write a checkpoint");
    add_data_options(c_train, train.data);
    c_train->add_option("--topology", train.topology, "Graph topology")->check(CLI::IsMember({"dense", "star"}));
    c_train->add_flag("--gated", train.gated, "Use gated graph convolutions");
    c_train->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::PositiveNumber);
    c_train->add_option("--batch", train.batch, "Questions per batch")->check(CLI::PositiveNumber);
    c_train->add_option("--lr", train.lr, "Base learning rate");
    c_train->add_option("--lr-gamma", train.lr_gamma, "StepLR decay factor");
    c_train->add_option("--lr-step", train.lr_step, "StepLR period in epochs")->check(CLI::PositiveNumber);
    c_train->add_option("--w-neg", train.w_neg, "Class weight of negatives");
    c_train->add_option("--w-pos", train.w_pos, "Class weight of positives");
    c_train->add_option("--weight-decay", train.weight_decay, "AdamW decoupled weight decay");
    c_train->add_flag("--no-bias", train.no_bias, "Disable all bias terms");
    c_train->add_option("--target-f1", train.target_f1, "Stop once validation F1 reaches this value");
    c_train->add_option("--seed", train.seed, "Seed for init and shuffling");
    c_train->add_option("--out", train.out, "Checkpoint path")->required();
    c_train->add_option("--log", train.log, "JSON Lines epoch log path");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint or the lexical baseline on a split");
    add_data_options(c_eval, eval.data);
    c_eval->add_option("--model", eval.model, "Checkpoint path");
    c_eval->add_option("--split", eval.split, "Split to evaluate")->check(CLI::IsMember({"train", "dev", "test"}));
    c_eval->add_option("--report", eval.report, "Write the JSON report here");
    c_eval->add_option("--baseline", eval.baseline, "Score with a baseline instead of a model")
        ->check(CLI::IsMember({"none", "lexical"}));
    c_eval->add_option("--topology", eval.topology, "Refuse checkpoints of another topology")
        ->check(CLI::IsMember({"dense", "star"}));
    c_eval->add_flag("--macro", eval.macro, "Also report per-question macro F1");

    PredictArgs pred;
    auto* c_pred = app.add_subcommand("predict", "Per-source probabilities and the predicted positive set");
    add_data_options(c_pred, pred.data);
    c_pred->add_option("--model", pred.model, "Checkpoint path")->required();
    auto* o_qid = c_pred->add_option("--qid", pred.qid, "Single question id");
    auto* o_split = c_pred->add_option("--split", pred.split, "Whole split")->check(CLI::IsMember({"train", "dev", "test"}));
    o_qid->excludes(o_split);

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Forward latency over one star graph");
    c_bench->add_option("--model", bench.model, "Star checkpoint (default: freshly initialized reference model)");
    c_bench->add_option("--nodes", bench.nodes, "Source nodes in the graph")->check(CLI::PositiveNumber);
    c_bench->add_option("--repeat", bench.repeat, "Timed forward passes")->check(CLI::PositiveNumber);
    c_bench->add_flag("--gated", bench.gated, "Gated reference model when no checkpoint is given");
    c_bench->add_option("--seed", bench.seed, "Seed for features and init");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset");
    c_synth->add_option("--questions", synth.spec.n_questions, "Questions");
    c_synth->add_option("--sources", synth.spec.sources_per_question, "Sources per question");
    c_synth->add_option("--positives", synth.spec.positives_per_question, "Positives per question");
    c_synth->add_option("--noise", synth.spec.noise_scale, "Per-coordinate noise standard deviation");
    c_synth->add_option("--seed", synth.spec.seed, "Generator seed");
    c_synth->add_option("--dev", synth.spec.dev_questions, "Dev questions (taken from the end)");
    c_synth->add_option("--test", synth.spec.test_questions, "Test questions (taken from the end)");
    c_synth->add_option("--text-dim", synth.spec.dims.text, "Text feature width");
    c_synth->add_option("--image-dim", synth.spec.dims.image, "Image feature width");
    c_synth->add_option("--out", synth.out, "Output directory")->required();

    auto* c_schema = app.add_subcommand("schema", "Print the manifest JSON schema");
    document_defaults(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        emit_error(err, "usage_error", e.what());
        return 2;
    }

    try {
        if (c_train->parsed()) return cmd_train(train, out, err);
        if (c_eval->parsed()) return cmd_eval(eval, out, err);
        if (c_pred->parsed()) return cmd_predict(pred, out, err);
        if (c_bench->parsed()) return cmd_bench(bench, out, err);
        if (c_synth->parsed()) {
            synth.spec.validate();
            return cmd_synth(synth, out, err);
        }
        if (c_schema->parsed()) {
            echo_config(err, "schema", Json::object());
            out << manifest_schema_json() << '\n';
            return 0;
        }
        emit_error(err, "usage_error", "no subcommand");
        return 2;
    } catch (const Error& e) {
        emit_error(err, e.code(), e.what());
        return e.is_input_error() ? 2 : 3;
    } catch (const std::bad_alloc&) {
        emit_error(err, "out_of_memory", "allocation failed");
        return 3;
    } catch (const std::exception& e) {
        emit_error(err, "internal_error", e.what());
        return 3;
    }
}

}  // namespace mmgr::cli
