// iplan: corpus generation, model building, recommendation, evaluation and serving.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "iplan/eval.hpp"
#include "iplan/service.hpp"
#include "iplan/synthetic.hpp"

namespace {

using namespace iplan;

struct CliError : std::runtime_error {
    CliError(std::string code, const std::string& message) : std::runtime_error(message), code(std::move(code)) {}
    std::string code;
};

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError("io", "cannot open " + path);
    return nlohmann::json::parse(in);
}

// "km:0.5,hour:0.25" -> shift edits.
PerturbationSpec parse_perturbations(const std::string& text, std::size_t count, std::uint64_t seed) {
    PerturbationSpec spec;
    spec.count = count;
    spec.seed = seed;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw CliError("usage", "perturbation '" + item + "' must be feature:delta");
        FeatureEdit e;
        e.feature = item.substr(0, colon);
        e.kind = FeatureEdit::Kind::shift;
        e.delta = std::stod(item.substr(colon + 1));
        spec.edits.push_back(e);
    }
    return spec;
}

void print_plan(const Plan& plan, const Translator& translator, bool as_json) {
    if (as_json) {
        nlohmann::json out{{"plan", to_json(plan)}, {"forecast", to_json(plan.forecast)}};
        std::cout << out.dump(2) << '\n';
        return;
    }
    std::cout << translator.render_plan(plan).text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incident response planner: learns a stochastic MDP from reports and recommends action plans"};
    app.require_subcommand(1);

    // gen-corpus
    SyntheticSpec gen;
    double train_fraction = 0.8;
    std::string gen_out, gen_refs;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate a seeded synthetic corpus");
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--reports", gen.n_reports, "Number of reports")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--policies", gen.n_policies, "Ground-truth action sequences")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--classes", gen.n_classes, "Event types used for initial states")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--noise", gen.noise, "Per-step deviation probability")->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--train-fraction", train_fraction, "Share of reports tagged train (0 disables the split)")
        ->check(CLI::Range(0.0, 1.0));
    gen_cmd->add_option("--out", gen_out, "Corpus file")->required();
    gen_cmd->add_option("--references", gen_refs, "Also write a reference set for the evaluation");

    // build
    std::string build_corpus, build_out;
    bool build_solve = false;
    auto* build_cmd = app.add_subcommand("build", "Build a model from a corpus (train split)");
    build_cmd->add_option("--corpus", build_corpus, "Corpus file")->required();
    build_cmd->add_option("--out", build_out, "Model file")->required();
    build_cmd->add_flag("--solve", build_solve, "Solve right away");

    // solve
    std::string solve_model, solve_out;
    auto* solve_cmd = app.add_subcommand("solve", "Solve a built model");
    solve_cmd->add_option("--model", solve_model, "Model file")->required();
    solve_cmd->add_option("--out", solve_out, "Output model file (default: overwrite)");

    // recommend
    std::string rec_model = env_or("MODEL_PATH", ""), rec_state, rec_text, rec_action;
    bool rec_json = false;
    auto* rec_cmd = app.add_subcommand("recommend", "Recommend a plan for one event");
    rec_cmd->add_option("--model", rec_model, "Model file (default: $MODEL_PATH)");
    auto* state_opt = rec_cmd->add_option("--state-file", rec_state, "JSON event state");
    auto* text_opt = rec_cmd->add_option("--text", rec_text, "Free-text event description");
    state_opt->excludes(text_opt);
    rec_cmd->add_option("--what-if", rec_action, "Force the first action");
    rec_cmd->add_flag("--json", rec_json, "Print the plan as JSON");

    // evaluate
    std::string ev_corpus, ev_model, ev_refs, ev_out, ev_perturb = "km:0.5,hour:0.25";
    SuiteOptions ev_options;
    std::size_t ev_variants = 10;
    auto* ev_cmd = app.add_subcommand("evaluate", "Score and consistency per category and split");
    ev_cmd->add_option("--corpus", ev_corpus, "Corpus file")->required();
    ev_cmd->add_option("--model", ev_model, "Solved model file")->required();
    ev_cmd->add_option("--references", ev_refs, "Reference set file")->required();
    ev_cmd->add_option("--out", ev_out, "Results file")->required();
    ev_cmd->add_option("--events", ev_options.events_per_category, "Events per category and split");
    ev_cmd->add_option("--seed", ev_options.seed, "Seed for sampling, baselines and perturbations");
    ev_cmd->add_option("--perturb", ev_perturb, "Shift edits feature:delta[,feature:delta...]; empty = identity");
    ev_cmd->add_option("--variants", ev_variants, "Perturbed variants per event")->check(CLI::PositiveNumber);

    // serve
    ServiceConfig serve_config = ServiceConfig::from_env();
    double serve_threshold = -1.0;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--model", serve_config.model_path, "Model file (default: $MODEL_PATH)");
    serve_cmd->add_option("--listen", serve_config.listen_addr, "host:port (default: $LISTEN_ADDR or 127.0.0.1:8080)");
    serve_cmd->add_option("--confidence-threshold", serve_threshold, "Override the low-confidence distance");

    // bench
    std::vector<std::size_t> bench_sizes{100, 300, 1000, 3000};
    std::uint64_t bench_seed = 7;
    double bench_noise = 0.1;
    auto* bench_cmd = app.add_subcommand("bench", "Time the solver on generated models");
    bench_cmd->add_option("--reports", bench_sizes, "Corpus sizes")->delimiter(',');
    bench_cmd->add_option("--seed", bench_seed, "Random seed");
    bench_cmd->add_option("--noise", bench_noise, "Per-step deviation probability")->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help exits 0; every other parse failure is a usage error.
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*gen_cmd) {
            auto synthetic = generate_synthetic(gen);
            Corpus corpus = synthetic.corpus;
            if (train_fraction > 0.0 && train_fraction < 1.0) corpus = split(std::move(corpus), train_fraction, gen.seed);
            save_corpus(corpus, gen_out);
            if (!gen_refs.empty()) save_reference_set(reference_from_synthetic(synthetic), gen_refs);
            std::cerr << "wrote " << corpus.reports.size() << " reports to " << gen_out << '\n';
        } else if (*build_cmd) {
            auto model = Model::build(load_corpus(build_corpus));
            if (build_solve) model.solve();
            save_model(model, build_out);
            const auto s = model.stats();
            std::cerr << "model: " << s.n_nodes << " nodes, " << s.n_edges << " edges, " << s.n_reports
                      << " reports" << (build_solve ? ", solved" : "") << '\n';
        } else if (*solve_cmd) {
            auto model = load_model(solve_model);
            const auto t0 = std::chrono::steady_clock::now();
            model.solve();
            const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            save_model(model, solve_out.empty() ? solve_model : solve_out);
            const auto& st = model.solution().stats;
            std::cerr << "solved in " << ms << " ms (" << st.pops << " pops, " << model.solution().unreachable.size()
                      << " unreachable)\n";
        } else if (*rec_cmd) {
            if (rec_model.empty()) throw CliError("usage", "--model or MODEL_PATH is required");
            if (rec_state.empty() && rec_text.empty()) throw CliError("usage", "--state-file or --text is required");
            const auto model = load_model(rec_model);
            if (!model.solved()) throw CliError("model_unsolved", "model has not been solved; run `iplan solve` first");
            Translator translator(model.schema(), HttpProvider::from_env());
            EventState state;
            if (!rec_state.empty()) {
                state = state_from_json(read_json_file(rec_state), model.schema());
            } else {
                const auto parsed = translator.parse_event(rec_text);
                if (!parsed.state) {
                    std::string missing;
                    for (const auto& m : parsed.missing) missing += (missing.empty() ? "" : ", ") + m;
                    throw CliError("unparseable_event", "could not fill: " + missing);
                }
                state = *parsed.state;
            }
            const auto plan = rec_action.empty() ? recommend(model, state) : what_if(model, state, ActionId{rec_action});
            print_plan(plan, translator, rec_json);
        } else if (*ev_cmd) {
            const auto corpus = load_corpus(ev_corpus);
            const auto model = load_model(ev_model);
            if (!model.solved()) throw CliError("model_unsolved", "model has not been solved");
            const auto spec = ev_perturb.empty() ? PerturbationSpec::identity(ev_variants)
                                                 : parse_perturbations(ev_perturb, ev_variants, ev_options.seed);
            const auto report = evaluate_suite(model, corpus, load_reference_set(ev_refs), spec, HashingEmbedder(),
                                               ev_options);
            save_results(report, ev_out);
            std::printf("%-6s %-12s %6s %8s %8s %8s %8s\n", "split", "category", "n", "score", "s_min", "s_max", "consist");
            for (const auto& s : report.summaries) {
                if (s.skipped) {
                    std::printf("%-6s %-12s skipped (%s)\n", s.split.c_str(), s.category.c_str(), s.reason.c_str());
                    continue;
                }
                std::printf("%-6s %-12s %6zu %8.4f %8.4f %8.4f %7.2f%%\n", s.split.c_str(), s.category.c_str(),
                            s.n_events, s.score.median, s.score.min, s.score.max, s.consistency.mean);
            }
        } else if (*serve_cmd) {
            if (serve_config.model_path.empty()) throw CliError("usage", "--model or MODEL_PATH is required");
            auto model = std::make_shared<Model>(load_model(serve_config.model_path));
            if (!model->solved()) throw CliError("model_unsolved", "model has not been solved");
            if (serve_threshold >= 0.0) model->set_confidence_threshold(serve_threshold);
            parse_listen_addr(serve_config.listen_addr);
            Service service(model, HttpProvider::from_env(), serve_config);
            std::cerr << "serving " << serve_config.model_path << " on " << serve_config.listen_addr << '\n';
            serve(service, serve_config.listen_addr);
        } else if (*bench_cmd) {
            std::printf("%8s %8s %8s %12s %12s %10s\n", "reports", "nodes", "edges", "ips_ms", "vi_ms", "max_dQ");
            for (auto n : bench_sizes) {
                SyntheticSpec spec;
                spec.seed = bench_seed;
                spec.n_reports = n;
                spec.noise = bench_noise;
                const auto synthetic = generate_synthetic(spec);
                std::vector<const Report*> reports;
                for (const auto& r : synthetic.corpus.reports) reports.push_back(&r);
                const auto mdp = build_mdp(reports, synthetic.corpus.schema);
                const auto ssp = to_ssp(mdp, CostModel::frequency_penalized);
                const auto t0 = std::chrono::steady_clock::now();
                const auto sol = solve(ssp);
                const auto t1 = std::chrono::steady_clock::now();
                const auto vi = value_iteration_oracle(ssp);
                const auto t2 = std::chrono::steady_clock::now();
                double max_dq = 0.0;
                for (NodeId s = 0; s < ssp.size(); ++s) {
                    for (std::size_t a = 0; a < sol.q[s].size(); ++a) {
                        if (std::isfinite(vi.q[s][a])) max_dq = std::max(max_dq, std::fabs(sol.q[s][a] - vi.q[s][a]));
                    }
                }
                std::printf("%8zu %8zu %8zu %12.3f %12.3f %10.2e\n", n, mdp.size(), mdp.edge_count(),
                            std::chrono::duration<double, std::milli>(t1 - t0).count(),
                            std::chrono::duration<double, std::milli>(t2 - t1).count(), max_dq);
            }
        }
    } catch (const CliError& e) {
        std::cerr << nlohmann::json{{"error", {{"code", e.code}, {"message", e.what()}}}}.dump() << '\n';
        return e.code == "usage" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", {{"code", "failed"}, {"message", e.what()}}}}.dump() << '\n';
        return 1;
    }
    return 0;
}
